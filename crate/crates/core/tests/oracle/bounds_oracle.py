# Independent 60-digit evaluation of the cold-start and reward bounds.
# The frozen constants in tests/bounds.rs were produced by this script.
from mpmath import mp, mpf, log, power, floor

mp.dps = 60


def t_start(N, M, K, delta_gap, nu, pf, gamma, alpha, eta, Q, k, conf, T):
    lead = 512 * max(log(mpf(4) * N * Q / (k * mpf(delta_gap))), log(mpf(88) / mpf(conf)))
    e = 1 / (1 - mpf(alpha))
    base = 3 * mpf(pf) ** 2 * (1 - mpf(gamma)) ** 2 * mpf(nu)
    tail = 1 - max(mpf(1) / T, mpf(2) / (mpf(eta) * Q))
    return power(lead, e) / (power(base, e) * tail)


def reward_lb(N, M, K, delta_gap, nu, pf, gamma, alpha, eta, Q, k, conf, T):
    ts = t_start(N, M, K, delta_gap, nu, pf, gamma, alpha, eta, Q, k, conf, T)
    a = mpf(alpha)
    T = mpf(T)
    inner = 1 - ts / T - power(2, a) * power(T - ts, 1 - a) / (T * (1 - a)) \
        - max(1 / T, mpf(2) / (mpf(eta) * Q))
    return inner * (1 - mpf(conf))


CASES = [
    # N, M, K, delta_gap, nu, pf, gamma, alpha, eta, Q, k, conf, T
    (1000, 5000, 10, 0.25, 0.3, 0.5, 0.5, 0.1, 0.15, 50, 50, 0.1, 100000),
    (200, 400, 4, 0.3, 0.3, 1.0, 0.2, 0.3, 0.5, 20, 10, 0.05, 50000),
    (5000, 20000, 50, 0.5, 0.1, 0.25, 0.0, 0.5, 0.05, 100, 20, 0.2, 10 ** 9),
    (64, 128, 2, 0.1, 0.5, 0.9, 0.7, 0.05, 0.25, 16, 8, 0.01, 10 ** 12),
    (1000, 5000, 10, 0.25, 0.3, 0.5, 0.5, 0.1, 0.15, 50, 50, 0.1, 10 ** 7),
    (200, 400, 4, 0.3, 0.3, 1.0, 0.2, 0.3, 0.5, 20, 10, 0.05, 10 ** 8),
]

for c in CASES:
    ts = t_start(*c)
    print("case", c)
    print("  t_start =", mp.nstr(ts, 20))
    if c[-1] >= ts:
        print("  reward_lower_bound =", mp.nstr(reward_lb(*c), 20))

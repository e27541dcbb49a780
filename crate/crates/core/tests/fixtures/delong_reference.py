"""Reference DeLong computation used to freeze delong_40.json.

Independent of the Rust code: placement values come from the direct pairwise
kernel (1 if pos > neg, 0.5 if equal), not from ranks.

    python3 delong_reference.py > delong_40.json
"""
import json

import numpy as np
from scipy.stats import norm


def kernel(x, y):
    return 1.0 if x > y else 0.5 if x == y else 0.0


def structural(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    v10 = np.array([np.mean([kernel(p, n) for n in neg]) for p in pos])
    v01 = np.array([np.mean([kernel(p, n) for p in pos]) for n in neg])
    return v10.mean(), v10, v01


def main():
    rng = np.random.default_rng(20240501)
    n = 40
    labels = [1] * 17 + [0] * 23
    rng.shuffle(labels)
    labels = [int(x) for x in labels]
    # Rounded to two decimals so ties occur within and across classes.
    a = [round(float(rng.normal(0.8 * l, 1.0)), 2) for l in labels]
    b = [round(float(rng.normal(0.5 * l, 1.0)), 1) for l in labels]

    auc_a, a10, a01 = structural(a, labels)
    auc_b, b10, b01 = structural(b, labels)
    s10 = np.cov(np.vstack([a10, b10]))
    s01 = np.cov(np.vstack([a01, b01]))
    m, k = len(a10), len(a01)
    s = s10 / m + s01 / k
    var_a, var_b, cov = s[0, 0], s[1, 1], s[0, 1]
    var_diff = var_a + var_b - 2 * cov
    z = (auc_a - auc_b) / np.sqrt(var_diff)
    p = 2 * norm.sf(abs(z))
    q = norm.ppf(0.975)

    def ci(auc, var):
        half = q * np.sqrt(var)
        return [max(0.0, auc - half), min(1.0, auc + half)]

    out = {
        "n": n,
        "labels": labels,
        "scores_a": a,
        "scores_b": b,
        "auc_a": auc_a,
        "auc_b": auc_b,
        "var_a": var_a,
        "var_b": var_b,
        "covariance": cov,
        "z": z,
        "p_value": p,
        "ci_a": ci(auc_a, var_a),
        "ci_b": ci(auc_b, var_b),
    }
    print(json.dumps({k: (float(v) if isinstance(v, np.floating) else v) for k, v in out.items()}, indent=1))


if __name__ == "__main__":
    main()

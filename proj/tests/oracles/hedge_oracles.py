"""Independent reference values for the allocator tests (plain Python, no shared code)."""
import math

# softmax of {A:0.3, B:0.0}
a, b = math.exp(0.3), 1.0
print("softmax A=%.17g B=%.17g" % (a / (a + b), b / (a + b)))

# clipped importance update
eta, kappa = 0.15, 4.0
p = {"A": 0.4, "B": 0.1}
r = {"A": 1.0, "B": -1.0}
for k in p:
    print("delta", k, "%.17g" % (eta * r[k] * min(1.0 / p[k], kappa)))


def project(p, floors, ceil, max_rounds=10):
    p = dict(p)
    for _ in range(max_rounds):
        before = dict(p)
        excess = 0.0
        for k, c in ceil.items():
            if p[k] > c:
                excess += p[k] - c
                p[k] = c
        if excess > 0:
            rec = [k for k in p if k not in ceil or p[k] < ceil[k]]
            mass = sum(p[k] for k in rec)
            for k in rec:
                p[k] += excess * (p[k] / mass if mass > 0 else 1.0 / len(rec))
        deficit = 0.0
        for k, f in floors.items():
            if p[k] < f:
                deficit += f - p[k]
                p[k] = f
        if deficit > 0:
            don = {k: p[k] - floors.get(k, 0.0) for k in p if p[k] > floors.get(k, 0.0)}
            tot = sum(don.values())
            for k, s in don.items():
                p[k] -= deficit * s / tot
        if all(abs(p[k] - before[k]) <= 1e-13 for k in p):
            break
    s = sum(p.values())
    return {k: v / s for k, v in p.items()}


out = project({"Merge": 0.5, "Continue": 0.3, "EDA": 0.2, "Initial": 0.0, "Ablation": 0.0},
              {"Continue": 0.10, "Merge": 0.05, "EDA": 0.05, "Initial": 0.05, "Ablation": 0.05},
              {"Merge": 0.30})
for k in sorted(out):
    print("bounds", k, "%.17g" % out[k])

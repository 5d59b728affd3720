"""Classify a few reference steady states and print their limiting saturation.

Run with ``python3 demos/steady_cases.py``.
"""
from forch.experiments import reference_params
from forch.steady import classify_case, integrate_profile

CASES = [  # (n, c1, c2, s0)
    (3, 1.0, -1.0, 0.5),
    (3, 1.0, 1.0, 0.5),
    (2, 1.0, 1.0, 0.5),
    (2, -1.0, 1.0, 0.3),
]


def main():
    print(f"{'n':>2} {'c1':>5} {'c2':>5} {'s0':>4}  {'case':<10} {'s_inf':>10}  prediction")
    for n, c1, c2, s0 in CASES:
        params = reference_params(n, c1, c2, s0)
        label = classify_case(params)
        profile = integrate_profile(params, 1e4 * params.r0)
        s_inf = profile.s_infty.value if profile.s_infty else float("nan")
        print(f"{n:>2} {c1:>5} {c2:>5} {s0:>4}  {label.case:<10} {s_inf:>10.6f}  {label.prediction.to_dict()}")


if __name__ == "__main__":
    main()

"""Regenerates the synthetic calibration fixtures in this directory.

The trace is noiseless: every row is computed from the generator profile in
synthetic_generator.json, so calibrating it must recover those coefficients.
"""
import json
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# Bottleneck ResNet-152 MACs on a 32x32 input, ceil(r * n) blocks kept per group.
def resnet152_macs(r, side=32, classes=10):
    sizes, widths = [3, 8, 36, 3], [64, 128, 256, 512]
    s = (side - 1) // 2 + 1
    macs = 3 * 64 * 49 * s * s
    s = (s - 1) // 2 + 1
    cin = 64
    for g, (n, w) in enumerate(zip(sizes, widths)):
        kept = max(1, math.ceil(r * n - 1e-9))
        for b in range(n):
            stride = 2 if (b == 0 and g > 0) else 1
            out = 4 * w
            so = (s - 1) // stride + 1
            m = cin * w * s * s + 9 * w * w * so * so + w * out * so * so
            if b == 0:
                m += cin * out * so * so
            if b < kept:
                macs += m
            cin, s = out, so
    return macs + 2048 * classes


GEN = dict(label="synthetic-soc", f_knee_hz=900e6, v_min=0.75, alpha_c=2.0e-9,
           p_static_w=0.6, theta_macs_per_cycle=2.0, f_min_hz=400e6, f_max_hz=1800e6)
GEN["k_slope"] = GEN["f_knee_hz"] / GEN["v_min"]


def power(f):
    v = GEN["v_min"] if f <= GEN["f_knee_hz"] else f / GEN["k_slope"]
    return GEN["alpha_c"] * v * v * f + GEN["p_static_w"]


def main():
    ratios = [1.0, 0.7, 0.5]
    work = {r: resnet152_macs(r) for r in ratios}
    freqs = [400e6 + 200e6 * i for i in range(8)]
    with open(os.path.join(HERE, "synthetic_generator.json"), "w") as f:
        json.dump(GEN, f, indent=2)
        f.write("\n")
    with open(os.path.join(HERE, "synthetic_work.csv"), "w") as f:
        f.write("ratio,macs\n")
        for r in ratios:
            f.write(f"{r},{work[r]}\n")
    with open(os.path.join(HERE, "synthetic_trace.csv"), "w") as f:
        f.write("device,f_hz,ratio,latency_s,energy_j\n")
        for r in ratios:
            for fr in freqs:
                tau = work[r] / (GEN["theta_macs_per_cycle"] * fr)
                f.write(f"synthetic-soc,{fr:.0f},{r},{tau:.17g},{power(fr) * tau:.17g}\n")


if __name__ == "__main__":
    main()

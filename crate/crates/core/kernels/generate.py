"""Regenerates the placeholder kernel bank.

Motion kernels (a)-(h) are random smooth camera trajectories rasterized on a
19x19 grid, sharpened by a power law until their Frobenius norm hits the
published target. (i) is an isotropic Gaussian whose width is solved for the
same way; (j) is the 7x7 box. All kernels are nonnegative and sum to one, so
their circular-convolution operator norm is exactly one.
"""
import numpy as np

TARGETS = {
    "a": 0.2246, "b": 0.1933, "c": 0.1907, "d": 0.1778,
    "e": 0.2255, "f": 0.2163, "g": 0.1917, "h": 0.1737,
}
SIZE = 19


def trajectory(rng):
    pos = np.array([SIZE / 2.0, SIZE / 2.0])
    vel = rng.normal(size=2)
    vel /= np.linalg.norm(vel)
    acc = np.zeros((SIZE, SIZE))
    for _ in range(400):
        vel += 0.25 * rng.normal(size=2)
        vel /= np.linalg.norm(vel)
        pos = np.clip(pos + 0.05 * vel, 2.0, SIZE - 3.0)
        r, c = pos
        r0, c0 = int(r), int(c)
        fr, fc = r - r0, c - c0
        acc[r0, c0] += (1 - fr) * (1 - fc)
        acc[r0 + 1, c0] += fr * (1 - fc)
        acc[r0, c0 + 1] += (1 - fr) * fc
        acc[r0 + 1, c0 + 1] += fr * fc
    # one pass of 3x3 smoothing widens the support
    pad = np.pad(acc, 1)
    sm = sum(pad[i:i + SIZE, j:j + SIZE] for i in range(3) for j in range(3)) / 9.0
    return sm


def fit_power(base, target):
    def frob(p):
        k = base ** p
        k /= k.sum()
        return np.sqrt((k ** 2).sum())
    lo, hi = 0.0, 8.0
    if not (frob(lo) < target < frob(hi)):
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if frob(mid) < target:
            lo = mid
        else:
            hi = mid
    k = base ** lo
    return k / k.sum()


def write(name, k, comment):
    h, w = k.shape
    with open(f"{name}.txt", "w") as f:
        f.write(f"{h} {w}\n")
        for row in k:
            f.write(" ".join(f"{v:.12e}" for v in row) + "\n")
    print(name, comment, "frob=%.6f" % np.sqrt((k ** 2).sum()), "sum=%.12f" % k.sum())


def main():
    rng = np.random.default_rng(20240601)
    for name, target in TARGETS.items():
        while True:
            k = fit_power(trajectory(rng), target)
            if k is not None:
                break
        write(f"motion_{name}", k, "motion")
    # gaussian width solved for frobenius 0.1763 on a 15x15 support
    def gauss(s):
        ax = np.arange(15) - 7
        g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * s * s))
        return g / g.sum()
    lo, hi = 0.5, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sqrt((gauss(mid) ** 2).sum()) > 0.1763:
            lo = mid
        else:
            hi = mid
    print("gaussian sigma", lo)
    write("gaussian_i", gauss(lo), f"gaussian sigma={lo:.6f}")
    write("square_j", np.full((7, 7), 1.0 / 49.0), "box 7x7")


if __name__ == "__main__":
    main()

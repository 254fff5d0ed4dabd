"""Independent numpy reference values frozen into the C++ unit tests.

Inputs are closed-form sequences so both sides can rebuild them exactly.
Run: python3 tests/oracle/fixtures.py
"""
import numpy as np

np.set_printoptions(precision=17)


def seq(n, f):
    return np.array([f(i) for i in range(n)], dtype=np.float64)


def conv2d(x, k, stride, pad):
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n, f, oh, ow))
    for i in range(oh):
        for j in range(ow):
            patch = xp[:, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
            out[:, :, i, j] = np.einsum("nchw,fchw->nf", patch, k)
    return out


def conv_transpose2d(x, k, stride, pad, out_pad):
    # scatter form: every input pixel paints a kernel-sized patch
    n, cin, h, w = x.shape
    _, cout, kh, kw = k.shape
    full_h = (h - 1) * stride + kh + out_pad
    full_w = (w - 1) * stride + kw + out_pad
    full = np.zeros((n, cout, full_h + pad, full_w + pad))
    for i in range(h):
        for j in range(w):
            full[:, :, i * stride:i * stride + kh, j * stride:j * stride + kw] += np.einsum(
                "nc,cohw->nohw", x[:, :, i, j], k)
    oh = (h - 1) * stride - 2 * pad + kh + out_pad
    ow = (w - 1) * stride - 2 * pad + kw + out_pad
    return full[:, :, pad:pad + oh, pad:pad + ow]


def ssim(a, b, win=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    for ch in range(a.shape[0]):
        x, y = a[ch], b[ch]
        h, w = x.shape
        wh, ww = min(win, h), min(win, w)
        def g(m):
            t = np.arange(m) - (m - 1) / 2
            v = np.exp(-t * t / (2 * sigma * sigma))
            return v / v.sum()
        W = np.outer(g(wh), g(ww))
        s = []
        for i in range(h - wh + 1):
            for j in range(w - ww + 1):
                px, py = x[i:i + wh, j:j + ww], y[i:i + wh, j:j + ww]
                mx, my = (W * px).sum(), (W * py).sum()
                vx = (W * px * px).sum() - mx * mx
                vy = (W * py * py).sum() - my * my
                cxy = (W * px * py).sum() - mx * my
                s.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
        vals.append(np.mean(s))
    return float(np.mean(vals))


def jsd(p, q):
    p, q = np.asarray(p), np.asarray(q)
    m = 0.5 * (p + q)
    kl = lambda a, b: float(np.sum(np.where(a > 0, a * np.log(a / b), 0.0)))
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def gan_value(pd, pg):
    pd, pg = np.asarray(pd), np.asarray(pg)
    d = pd / (pd + pg)
    return float(np.sum(pd * np.log(d)) + np.sum(pg * np.log(1 - d)))


def decov(h):
    h = h.reshape(h.shape[0], -1)
    c = (h - h.mean(0)).T @ (h - h.mean(0)) / h.shape[0]
    return 0.5 * (np.sum(c * c) - np.sum(np.diag(c) ** 2))


def batch_norm(x, gamma, beta, eps=1e-5):
    axes = (0, 2, 3)
    mu = x.mean(axis=axes, keepdims=True)
    var = x.var(axis=axes, keepdims=True)
    return gamma.reshape(1, -1, 1, 1) * (x - mu) / np.sqrt(var + eps) + beta.reshape(1, -1, 1, 1)


def main():
    x = seq(50, lambda i: np.sin(0.37 * i + 0.1)).reshape(1, 2, 5, 5)
    k = seq(54, lambda i: np.cos(0.23 * i)).reshape(3, 2, 3, 3)
    y = conv2d(x, k, 2, 1)
    print("conv2d s2p1 shape", y.shape)
    print("conv2d s2p1 values", repr(y.ravel()))

    xt = seq(18, lambda i: np.sin(0.5 * i)).reshape(1, 2, 3, 3)
    kt = seq(96, lambda i: np.cos(0.11 * i + 0.3)).reshape(2, 3, 4, 4)
    yt = conv_transpose2d(xt, kt, 2, 1, 0)
    print("conv_transpose2d s2p1 shape", yt.shape)
    print("conv_transpose2d sum", repr(yt.sum()), "weighted", repr((yt.ravel() * np.arange(1, yt.size + 1)).sum()))
    print("conv_transpose2d first", repr(yt.ravel()[:6]))

    a = (0.5 + 0.4 * seq(3 * 16 * 16, lambda i: np.sin(0.1 * i))).reshape(3, 16, 16)
    b = (0.5 + 0.4 * seq(3 * 16 * 16, lambda i: np.cos(0.13 * i))).reshape(3, 16, 16)
    print("ssim 3x16x16", repr(ssim(a, b)))
    small_a = (0.5 + 0.3 * seq(2 * 6 * 7, lambda i: np.sin(0.7 * i))).reshape(2, 6, 7)
    small_b = (0.5 + 0.3 * seq(2 * 6 * 7, lambda i: np.sin(0.7 * i + 0.4))).reshape(2, 6, 7)
    print("ssim 2x6x7 truncated window", repr(ssim(small_a, small_b)))
    print("ssim const 0 vs 1", repr(ssim(np.zeros((1, 8, 8)), np.ones((1, 8, 8)))))

    print("jsd [0.8,0.2] [0.2,0.8]", repr(jsd([0.8, 0.2], [0.2, 0.8])))
    print("value at D*", repr(gan_value([0.8, 0.2], [0.2, 0.8])))

    h = seq(12, lambda i: np.sin(1.3 * i + 0.2)).reshape(4, 3)
    print("decov 4x3", repr(decov(h)))
    print("decov [(1,1),(-1,-1)]", repr(decov(np.array([[1.0, 1.0], [-1.0, -1.0]]))))

    xb = seq(16, lambda i: np.cos(0.9 * i) * 2).reshape(4, 2, 1, 2)
    print("batch_norm", repr(batch_norm(xb, np.array([1.5, 0.5]), np.array([0.1, -0.2])).ravel()))

    data = seq(18, lambda i: np.sin(0.61 * i) + 0.05 * i).reshape(6, 3)
    cov = np.cov(data, rowvar=False)
    print("pca eigenvalues", repr(np.sort(np.linalg.eigvalsh(cov))[::-1]))

    l1 = np.abs(seq(8, lambda i: i * 0.25) - seq(8, lambda i: np.sin(i))).mean()
    print("l1_mean", repr(l1))


if __name__ == "__main__":
    main()

"""Independent reference computations shared by the test modules."""

import numpy as np

from monorgp.kernel import se_kernel


def batch_posterior(model, idx, y):
    """Exact GP posterior of the basis values given measurements at basis points."""
    K = model.K
    kdd = K[np.ix_(idx, idx)] + model.params.sigma_y**2 * np.eye(len(idx))
    kxd = K[:, idx]
    mu = kxd @ np.linalg.solve(kdd, y)
    C = K - kxd @ np.linalg.solve(kdd, kxd.T)
    return mu, C


def fd_mean_gradient(model, points, h):
    """Fourth-order central differences of the predictive mean, stacked by dimension."""
    f = model.predict_mean
    out = []
    for i in range(points.shape[1]):
        e = np.zeros(points.shape[1])
        e[i] = h
        out.append((-f(points + 2 * e) + 8 * f(points + e) - 8 * f(points - e) + f(points - 2 * e)) / (12 * h))
    return np.concatenate(out)


def fd_kernel_hessian(space, params, pts, h=1e-4):
    """Mixed second differences of k(x, x') in physical units."""
    nz, nt = pts.shape[1], len(pts)

    def k(a, b):
        return se_kernel(space.normalize(a), space.normalize(b), params)

    out = np.empty((nz * nt, nz * nt))
    for a in range(nz):
        ea = np.zeros(nz)
        ea[a] = h
        for b in range(nz):
            eb = np.zeros(nz)
            eb[b] = h
            blk = (k(pts + ea, pts + eb) - k(pts + ea, pts - eb)
                   - k(pts - ea, pts + eb) + k(pts - ea, pts - eb)) / (4 * h * h)
            out[a * nt:(a + 1) * nt, b * nt:(b + 1) * nt] = blk
    return out

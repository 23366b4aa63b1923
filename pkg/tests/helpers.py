"""Shared test utilities: finite-difference oracles and well-conditioned
random nets for gradient checking."""

import numpy as np

from kwskit import nn

FD_STEP = 1e-5
REL_TOL = 1e-4


def fd_grad(loss_fn, arr, h=FD_STEP):
    """Central finite differences of loss_fn w.r.t. every element of arr.

    loss_fn takes no arguments and reads arr by reference; arr is restored
    after each probe.
    """
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        fp = loss_fn()
        arr[i] = old - h
        fm = loss_fn()
        arr[i] = old
        g[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(analytic, numeric, floor=1e-6):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def tiny_arch():
    return nn.Architecture(in_h=13, in_w=10, channels=(2, 3, 2), d_emb=5,
                           n_classes=2)


def _pool_gaps_ok(pre_relu, margin):
    """True when every pooling window with a positive max has a clear winner,
    so finite-difference probes cannot flip an argmax."""
    a = np.maximum(pre_relu, 0.0)
    b, c, h, w = a.shape
    ho, wo = h // 2, w // 2
    win = (a[:, :, :ho * 2, :wo * 2].reshape(b, c, ho, 2, wo, 2)
           .transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4))
    top = np.sort(win, axis=-1)
    gap = top[..., 3] - top[..., 2]
    active = top[..., 3] > 0
    return bool(np.all(gap[active] > margin))


def sample_well_conditioned(rng, arch=None, batch=2, margin=1e-4,
                            max_tries=200):
    """Random params and inputs kept away from ReLU kinks and pooling ties,
    so central differences with step 1e-5 stay on one linear piece."""
    arch = arch or tiny_arch()
    for _ in range(max_tries):
        params = nn.init_params(arch, rng)
        x = rng.normal(0.0, 1.0, (batch, 1, arch.in_h, arch.in_w))
        _, tr = nn.forward(params, x)
        pres = list(tr.conv_pre) + [tr.fc1_pre]
        if any(np.min(np.abs(p)) <= margin for p in pres):
            continue
        if not all(_pool_gaps_ok(z, margin) for z in tr.conv_pre):
            continue
        labels = rng.integers(0, arch.n_classes, size=batch)
        return params, x, labels
    raise RuntimeError("could not sample a well-conditioned configuration")


def joint_loss_fn(params, x, labels, emb_weight=None):
    """Scalar loss: cross-entropy plus an optional linear probe on the
    embedding, matching the injected-gradient path."""
    def loss():
        _, tr = nn.forward(params, x)
        val, _ = nn.cross_entropy(tr.logits, labels)
        if emb_weight is not None:
            val += float(np.sum(tr.embedding * emb_weight))
        return val
    return loss


def analytic_grads(params, x, labels, emb_weight=None):
    _, tr = nn.forward(params, x)
    _, dlogits = nn.cross_entropy(tr.logits, labels)
    return nn.backward(params, tr, dlogits, demb=emb_weight)

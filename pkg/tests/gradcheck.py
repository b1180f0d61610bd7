"""Central finite-difference gradient oracle shared across test modules.

The oracle never touches backward(): it re-evaluates the forward scalar
with each input element nudged by +-h and compares the quotient against
the analytic gradient under a max-norm relative error.
"""

import numpy as np

from ddnas.autograd import Tensor


def rel_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-6)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar-valued f at x, element by element."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def check_grads(make_loss, arrays: dict, h: float = 1e-5) -> dict:
    """Compare backward() against the oracle for every named input.

    make_loss maps {name: Tensor} to a scalar Tensor and must rebuild the
    graph from scratch on every call. Returns {name: rel_error}.
    """
    tensors = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    make_loss(tensors).backward()
    errors = {}
    for name in arrays:
        def f(x, name=name):
            local = {k: Tensor(v) for k, v in arrays.items()}
            local[name] = Tensor(x)
            return make_loss(local).item()

        errors[name] = rel_error(tensors[name].grad, numeric_grad(f, arrays[name], h=h))
    return errors


def model_gradcheck(loss_fn, params, h: float = 1e-5) -> list[float]:
    """Oracle over in-place parameters: loss_fn() -> scalar Tensor from
    the current .data of every tensor in params."""
    loss = loss_fn()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    errors = []
    for p, a in zip(params, analytic):
        flat = p.data.ravel()
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = loss_fn().item()
            flat[i] = orig - h
            fm = loss_fn().item()
            flat[i] = orig
            num[i] = (fp - fm) / (2.0 * h)
        errors.append(rel_error(a, num.reshape(p.data.shape)))
    return errors

"""The little reverse-mode engine the learned enhancers are built on.

Tensors record an operation graph; backward() walks it once. The same
dozen primitives compose the waveform network, the spectral autoencoder,
and the differentiable intelligibility loss, and every gradient can be
cross-checked against central finite differences.
"""
import numpy as np

from easlab.nn import Tensor
from easlab.nn import autodiff as ad
from easlab.nn.training import grad_check

# a scalar chain with a reused input: d/da of (3a^2 + a^3) at a = 2
a = Tensor(np.array(2.0), requires_grad=True)
y = 3.0 * a * a + a * a * a
y.backward()
print(f"d/da (3a^2 + a^3) at a=2: analytic {a.grad}, by hand {6 * 2 + 3 * 4}")

# the convolution used by the waveform model, checked numerically
signal = Tensor(np.random.default_rng(0).normal(size=(1, 64)))
kernel = Tensor(np.random.default_rng(1).normal(size=(1, 1, 9)) * 0.3,
                requires_grad=True)
bias = Tensor(np.zeros(1), requires_grad=True)

def conv_loss():
    out = ad.conv1d(signal, kernel, bias)
    return ad.tsum(out * out)

err = grad_check(conv_loss, [kernel, bias], n_probes=30, rng_seed=0)
print(f"conv1d gradients vs central differences: max relative error {err:.2e}")

# unfold/fold are exact adjoints: <unfold(x), y> == <x, fold(y)>
x = Tensor(np.random.default_rng(2).normal(size=(3, 32)))
patches = ad.unfold(x, 8, 4)
probe = np.random.default_rng(3).normal(size=patches.values.shape)
lhs = np.sum(patches.values * probe)
folded = ad.fold(Tensor(probe), 4, 32)
rhs = np.sum(x.values * folded.values)
print(f"unfold/fold adjoint identity: |<Ax,y> - <x,A*y>| = {abs(lhs - rhs):.2e}")

import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from dyngraphgen.recurrence import GatedUpdate, Time2Vec, update_hidden


def test_time2vec_linear_and_sine():
    tv = Time2Vec(3)
    with torch.no_grad():
        tv.w.copy_(torch.tensor([1.0, math.pi / 2, 0.0]))
        tv.phi.zero_()
    out = tv(3).detach()
    assert float(out[0]) == 3.0
    assert abs(float(tv(1)[1].detach()) - 1.0) < 1e-12


def test_time2vec_formula(rng):
    tv = Time2Vec(5)
    w, phi = tv.w.detach().numpy(), tv.phi.detach().numpy()
    for t in range(1, 11):
        want = np.concatenate([[w[0] * t + phi[0]], np.sin(w[1:] * t + phi[1:])])
        np.testing.assert_allclose(tv(t).detach().numpy(), want, atol=1e-9, rtol=0)


def test_time2vec_rejects_empty():
    with pytest.raises(ValueError):
        Time2Vec(0)


def _cell(seed=0, inp=7, d=4):
    torch.manual_seed(seed)
    return GatedUpdate(inp, d)


def test_closed_update_gate_keeps_state():
    cell = _cell()
    with torch.no_grad():
        cell.x_gates.bias[:4] = -20.0
    h = torch.randn(5, 4).clamp(-1, 1)
    x = torch.randn(5, 7).clamp(-1, 1)
    with torch.no_grad():
        cell.x_gates.weight.clamp_(-0.3, 0.3)
        cell.h_gates.weight.clamp_(-0.3, 0.3)
    torch.testing.assert_close(cell(x, h), h, atol=1e-6, rtol=0)


def test_identical_rows():
    cell = _cell()
    out = cell(torch.randn(1, 7).repeat(3, 1), torch.randn(1, 4).repeat(3, 1))
    assert torch.equal(out[0], out[2])


def test_gate_equation_oracle(rng):
    cell = _cell()
    x, h = rng.standard_normal((6, 7)), rng.standard_normal((6, 4))
    W = cell.x_gates.weight.detach().numpy()
    b = cell.x_gates.bias.detach().numpy()
    U = cell.h_gates.weight.detach().numpy()
    Uc = cell.h_cand.weight.detach().numpy()
    sig = lambda v: 1 / (1 + np.exp(-v))
    gx = x @ W.T + b
    gh = h @ U.T
    u = sig(gx[:, :4] + gh[:, :4])
    r = sig(gx[:, 4:8] + gh[:, 4:8])
    c = np.tanh(gx[:, 8:] + (r * h) @ Uc.T)
    want = (1 - u) * h + u * c
    got = cell(torch.as_tensor(x), torch.as_tensor(h)).detach().numpy()
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_update_hidden_broadcasts_time_vector():
    cell = _cell(inp=3 + 2 + 2)
    enc, z, h = torch.randn(4, 3), torch.randn(4, 2), torch.randn(4, 4)
    tv = torch.randn(2)
    want = cell(torch.cat([enc, z, tv.expand(4, 2)], 1), h)
    assert torch.equal(update_hidden(cell, enc, z, tv, h), want)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        _cell()(torch.randn(3, 6), torch.randn(3, 4))


@given(seed=st.integers(0, 10_000))
def test_rowwise_independence(seed):
    g = torch.Generator().manual_seed(seed)
    cell = _cell(seed % 5)
    x, h = torch.randn(5, 7, generator=g), torch.randn(5, 4, generator=g)
    out = cell(x, h)
    x2, h2 = x.clone(), h.clone()
    x2[3] += 1.0
    h2[3] -= 1.0
    out2 = cell(x2, h2)
    keep = [0, 1, 2, 4]
    assert torch.equal(out[keep], out2[keep])
    assert torch.equal(cell(x, h), out)


def test_recurrence_gradients():
    cell = _cell(d=3)
    tv = Time2Vec(2)
    x, h = torch.randn(4, 5), torch.randn(4, 3)
    cell = GatedUpdate(5 + 2, 3)
    names = [n for n, _ in cell.named_parameters()] + [f"tv.{n}" for n, _ in tv.named_parameters()]
    params = tuple(cell.parameters()) + tuple(tv.parameters())

    def f(*ps):
        cp = dict(zip(names[:3 + 1], ps[:4]))
        tp = {n[3:]: p for n, p in zip(names[4:], ps[4:])}
        v = torch.func.functional_call(tv, tp, (2,))
        return torch.func.functional_call(cell, cp, (torch.cat([x, v.expand(4, 2)], 1), h)).sin().sum()

    assert torch.autograd.gradcheck(f, params, eps=1e-6, atol=1e-7, rtol=1e-4)

import math

import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from loginstruct.model import (
    FINETUNE,
    PRETRAIN,
    LogEncoder,
    ModelConfig,
    bce_loss,
    build_model,
    hyperspherical_loss,
    sinusoidal_encoding,
)
from loginstruct.preprocess import LME_INDEX, PAD_INDEX


def _model(d=16, max_len=4, vocab=12, **kw):
    cfg = ModelConfig(model_size=d, max_len=max_len, **kw)
    return build_model(vocab, cfg).eval()


def _batch():
    return torch.tensor([[LME_INDEX, 5, 6, 7, PAD_INDEX], [LME_INDEX, 8, 3, PAD_INDEX, PAD_INDEX]])


def test_config_defaults_and_validation():
    cfg = ModelConfig()
    assert (cfg.model_size, cfg.max_len, cfg.dropout_rate, cfg.learning_rate) == (16, 32, 0.05, 1e-4)
    assert (cfg.beta1, cfg.beta2, cfg.batch_size, cfg.patience_epochs, cfg.finetune_epochs) == (0.9, 0.99, 512, 5, 5)
    with pytest.raises(ValueError):
        ModelConfig(model_size=10, num_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(learning_rate=1.5)
    with pytest.raises(ValueError):
        ModelConfig.from_dict({"bogus": 1})
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_zero_params_give_zero_logits():
    model = _model()
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    assert torch.equal(model(_batch(), PRETRAIN), torch.zeros(2, 2))


def test_output_widths():
    model = _model(d=8, max_len=4)
    assert model(_batch(), PRETRAIN).shape == (2, 2)
    assert model(_batch(), FINETUNE).shape == (2, 8)
    with pytest.raises(ValueError):
        model(_batch(), "other")


def test_bad_inputs():
    model = _model(vocab=9)
    with pytest.raises(IndexError):
        model(torch.tensor([[0, 9, 1, 1, 1]]))
    with pytest.raises(ValueError):
        model(torch.tensor([[0, 3, 1]]))


def test_permutation_invariance_without_positions():
    model = _model(positional_encoding=False)
    x = torch.tensor([[LME_INDEX, 5, 6, 7, 8]])
    y = torch.tensor([[LME_INDEX, 7, 5, 8, 6]])
    with torch.no_grad():
        assert torch.allclose(model(x, FINETUNE), model(y, FINETUNE), atol=1e-6)
    positional = _model()
    with torch.no_grad():
        assert not torch.allclose(positional(x, FINETUNE), positional(y, FINETUNE), atol=1e-6)


@given(st.lists(st.integers(3, 11), min_size=2, max_size=2))
def test_tokens_under_padding_never_matter(fill):
    model = _model()
    x = torch.tensor([[LME_INDEX, 5, 6, PAD_INDEX, PAD_INDEX]])
    mask = x == PAD_INDEX
    y = x.clone()
    y[0, 3:] = torch.tensor(fill)
    with torch.no_grad():
        for phase in (PRETRAIN, FINETUNE):
            assert torch.equal(model(x, phase, mask), model(y, phase, mask))


def test_forward_deterministic_across_builds():
    cfg = ModelConfig(model_size=16, max_len=4, seed=7)
    a, b = build_model(12, cfg), build_model(12, cfg)
    torch.manual_seed(0)
    out_a = a.train()(_batch(), FINETUNE)
    torch.manual_seed(0)
    out_b = b.train()(_batch(), FINETUNE)
    assert torch.equal(out_a, out_b)


def test_dropout_only_in_training():
    model = _model(dropout_rate=0.5)
    with torch.no_grad():
        assert torch.equal(model(_batch()), model(_batch()))
        model.train()
        torch.manual_seed(0)
        first = model(_batch())
        assert not torch.equal(first, model(_batch()))


def test_sinusoidal_encoding_shape():
    pe = sinusoidal_encoding(5, 8)
    assert pe.shape == (5, 8)
    assert torch.allclose(pe[0, 1::2], torch.ones(4))


def test_bce_values():
    assert bce_loss(torch.zeros(1, 2), torch.tensor([1])).item() == pytest.approx(math.log(2), abs=1e-7)
    assert bce_loss(torch.tensor([[20.0, -20.0]]), torch.tensor([0])).item() == pytest.approx(0.0, abs=1e-12)
    # independent: -log softmax_1 = log(1 + e^{1.5})
    expected = math.log(1 + math.exp(1.5))
    assert expected == pytest.approx(1.7014, abs=1e-3)
    assert bce_loss(torch.tensor([[1.0, -0.5]]), torch.tensor([1])).item() == pytest.approx(expected, abs=1e-6)


def _vec(sq):
    return torch.tensor([[math.sqrt(sq), 0.0]], dtype=torch.float64)


def test_hyperspherical_values():
    assert hyperspherical_loss(_vec(4.0), torch.tensor([0])).item() == 4.0
    assert hyperspherical_loss(_vec(math.log(2)), torch.tensor([1])).item() == pytest.approx(math.log(2), abs=1e-12)
    assert hyperspherical_loss(_vec(50.0), torch.tensor([1])).item() < 1e-20
    assert math.isfinite(hyperspherical_loss(torch.zeros(1, 3), torch.tensor([1])).item())


def test_hyperspherical_batch_mean():
    x = torch.tensor([[2.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    far = -math.log(1 - math.exp(-1.0))
    assert hyperspherical_loss(x, torch.tensor([0, 1])).item() == pytest.approx((4.0 + far) / 2)


@given(st.floats(1e-6, 30.0), st.floats(1e-6, 30.0))
def test_hyperspherical_monotone(a, b):
    la = hyperspherical_loss(_vec(a), torch.tensor([1])).item()
    lb = hyperspherical_loss(_vec(b), torch.tensor([1])).item()
    assert la >= 0 and lb >= 0
    if a < b and b - a > 1e-9 and la > 1e-300:
        assert la > lb
    assert hyperspherical_loss(_vec(a), torch.tensor([0])).item() > 0


def _fd_check(model, loss_fn, phase, labels, x, h=1e-4):
    model = model.double().eval()
    for name, p in model.named_parameters():
        model.zero_grad()
        loss_fn(model(x, phase), labels).backward()
        analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        numeric = torch.zeros_like(p)
        flat = p.data.view(-1)
        for i in range(flat.numel()):
            old = flat[i].item()
            flat[i] = old + h
            up = loss_fn(model(x, phase), labels).item()
            flat[i] = old - h
            down = loss_fn(model(x, phase), labels).item()
            flat[i] = old
            numeric.view(-1)[i] = (up - down) / (2 * h)
        scale = max(analytic.norm().item(), numeric.norm().item())
        err = (analytic - numeric).norm().item() / scale if scale > 1e-12 else 0.0
        assert err < 1e-3, name


def test_gradients_small_network():
    cfg = ModelConfig(model_size=4, num_heads=2, num_layers=1, max_len=3, seed=1)
    model = build_model(7, cfg)
    x = torch.tensor([[0, 3, 4, 1], [0, 5, 6, 2]])
    _fd_check(model, bce_loss, PRETRAIN, torch.tensor([0, 1]), x)
    _fd_check(model, hyperspherical_loss, FINETUNE, torch.tensor([0, 1]), x)


def test_parameter_names_cover_expected_groups():
    names = {n for n, _ in _model().named_parameters()}
    for needle in ("embedding.weight", "layers.0.attention.query.weight", "layers.1.ff_out.bias",
                   "set1.2.weight", "set2.2.weight"):
        assert needle in names
    assert isinstance(_model(), LogEncoder)

import math

import numpy as np
import pytest
import torch

from motionref.model.backbone import ToyBackbone
from motionref.model.decoder import LanguageQueryDecoder, QuerySet, predict_masks, select_queries
from motionref.model.layers import sine_position_encoding
from motionref.model.text_encoder import encode_expression

from .common import finite_difference_check

CHANNELS = (4, 8, 8, 8)


def _decoder(**kwargs):
    base = dict(num_queries=3, query_dim=16, text_dim=16, mask_dim=8, num_layers=2, num_heads=2,
                num_classes=2, level_channels=CHANNELS, seed=1)
    base.update(kwargs)
    return LanguageQueryDecoder(**base)


def _pyramid(num_frames=2, dtype=torch.float32):
    backbone = ToyBackbone(CHANNELS, mask_dim=8, seed=0).to(dtype)
    frames = torch.rand(num_frames, 64, 64, 3, generator=torch.Generator().manual_seed(1)).to(dtype)
    return backbone(frames)


def test_identity_query_init():
    decoder = _decoder()
    with torch.no_grad():
        decoder.query_init.weight.copy_(torch.eye(16))
        decoder.query_bias.zero_()
    text = encode_expression("The red circle", 16)
    queries = decoder.init_queries(text, num_frames=2)
    assert queries.layer == 0
    assert tuple(queries.queries.shape) == (2, 3, 16)
    for q in queries.queries.reshape(-1, 16):
        torch.testing.assert_close(q, text.as_tensor())


def test_zero_text_gives_bias():
    decoder = _decoder()
    queries = decoder.init_queries(torch.zeros(16), num_frames=1)
    torch.testing.assert_close(queries.queries[0], decoder.query_bias)


def test_query_init_matches_matmul():
    decoder = _decoder(text_dim=12)
    text = torch.randn(12, generator=torch.Generator().manual_seed(4))
    queries = decoder.init_queries(text).queries[0].detach().double().numpy()
    w = decoder.query_init.weight.detach().double().numpy()
    b = decoder.query_bias.detach().double().numpy()
    np.testing.assert_allclose(queries, w @ text.double().numpy() + b, atol=1e-5)


def test_text_dim_mismatch():
    with pytest.raises(ValueError):
        _decoder().init_queries(torch.zeros(8))


def test_zero_layers_is_identity():
    decoder = _decoder(num_layers=0)
    text = encode_expression("The red circle", 16)
    queries = decoder.init_queries(text, 2)
    out = decoder.decode(queries, _pyramid(), text)
    assert torch.equal(out.queries, queries.queries)
    assert out.layer == 0


@pytest.mark.parametrize("num_layers,masked", [(1, True), (3, True), (4, False)])
def test_decode_shape(num_layers, masked):
    decoder = _decoder(num_layers=num_layers, masked_attention=masked)
    text = encode_expression("The red circle moves left", 16)
    out, intermediate = decoder.decode(decoder.init_queries(text, 2), _pyramid(), text,
                                       return_intermediate=True)
    assert tuple(out.queries.shape) == (2, 3, 16)
    assert out.layer == num_layers
    assert len(intermediate) == num_layers - 1
    assert torch.isfinite(out.queries).all()


def test_decode_rejects_refined_queries():
    decoder = _decoder()
    text = encode_expression("The red circle", 16)
    with pytest.raises(ValueError):
        decoder.decode(QuerySet(decoder.init_queries(text, 2).queries, layer=1), _pyramid(), text)


def test_decode_gradient():
    decoder = _decoder(masked_attention=False).double()
    pyramid = _pyramid(dtype=torch.float64)
    text = torch.as_tensor(encode_expression("The blue square", 16).vector)

    def readout():
        return decoder.decode(decoder.init_queries(text, 2), pyramid, text).queries.mean()

    finite_difference_check(readout, decoder.query_init.weight)


def test_attention_mask_keeps_text_token_and_rows_open():
    decoder = _decoder()
    queries = decoder.init_queries(encode_expression("The red circle", 16), 1).queries
    mask_features = torch.full((1, 4, 4, 8), -100.0)
    with torch.no_grad():
        decoder.mask_head.layers[-1].bias.fill_(1.0)
    blocked = decoder._attention_mask(queries, mask_features, (2, 2))
    assert tuple(blocked.shape) == (1, 3, 5)
    assert not blocked[..., -1].any()


def test_zero_class_head():
    decoder = _decoder(num_classes=2)
    with torch.no_grad():
        decoder.class_head.weight.zero_()
        decoder.class_head.bias.zero_()
    queries = torch.randn(2, 3, 16)
    text = encode_expression("The red circle", 16)
    logits = decoder.classify(queries, text)
    assert torch.count_nonzero(logits) == 0
    probs = logits.softmax(-1)
    torch.testing.assert_close(probs, torch.full_like(probs, 1 / 3))
    assert not select_queries(logits, 0.8).any()


def test_class_head_concatenates_query_then_text():
    decoder = _decoder()
    with torch.no_grad():
        decoder.class_head.weight[:, 16:].zero_()
    queries = torch.randn(1, 3, 16)
    a = decoder.classify(queries, encode_expression("The red circle", 16))
    b = decoder.classify(queries, encode_expression("The green triangle", 16))
    torch.testing.assert_close(a, b)


def test_class_head_matches_affine():
    decoder = _decoder()
    queries = torch.randn(2, 3, 16, dtype=torch.float64)
    text = encode_expression("The red circle", 16)
    decoder = decoder.double()
    logits = decoder.classify(queries, text).detach().numpy()
    w = decoder.class_head.weight.detach().numpy()
    b = decoder.class_head.bias.detach().numpy()
    joint = np.concatenate([queries.numpy(), np.broadcast_to(text.vector, (2, 3, 16))], axis=-1)
    np.testing.assert_allclose(logits, joint @ w.T + b, atol=1e-6)


def test_zero_mask_head():
    decoder = _decoder()
    with torch.no_grad():
        for layer in decoder.mask_head.layers:
            layer.weight.zero_()
            layer.bias.zero_()
    embeddings = decoder.embed_masks(torch.randn(2, 3, 16))
    assert tuple(embeddings.shape) == (2, 3, 8)
    assert torch.count_nonzero(embeddings) == 0


def test_mask_head_gradient():
    decoder = _decoder().double()
    queries = torch.randn(2, 3, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    finite_difference_check(lambda: decoder.embed_masks(queries).pow(2).sum(),
                            decoder.mask_head.layers[0].weight)


def test_predict_masks():
    features = torch.randn(1, 4, 4, 8)
    half = predict_masks(torch.zeros(1, 2, 8), features)
    torch.testing.assert_close(half, torch.full((1, 2, 4, 4), 0.5))

    embedding = torch.zeros(1, 1, 8)
    embedding[0, 0, 0] = 1
    pixel = torch.zeros(1, 1, 1, 8)
    pixel[0, 0, 0, 0] = 2
    assert abs(predict_masks(embedding, pixel).item() - 0.880797) < 1e-6

    masks = predict_masks(torch.randn(2, 3, 8), torch.randn(2, 4, 4, 8))
    assert ((masks > 0) & (masks < 1)).all()


def test_select_queries():
    logits = torch.tensor([[[10.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 5.0]]])
    kept = select_queries(logits, 0.8)
    assert kept.tolist() == [[True, False, False]]
    assert abs(logits[0, 0].softmax(-1)[0].item() - 0.99990920) < 1e-6
    for num_classes in range(1, 6):
        assert not select_queries(torch.zeros(1, 4, num_classes + 1), 0.8).any()
    for tau in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            select_queries(logits, tau)


def test_pixel_features_add_position_code():
    decoder = _decoder()
    pyramid = _pyramid(1)
    features = decoder.pixel_features(pyramid)
    assert features.shape == pyramid.mask_features.shape
    zero = pyramid._replace(mask_features=torch.zeros_like(pyramid.mask_features))
    code = decoder.pixel_features(zero)[0]
    assert not torch.allclose(code[0, 0], code[-1, -1])


def test_sine_position_encoding():
    pos = sine_position_encoding(3, 5, 8)
    assert tuple(pos.shape) == (15, 8)
    assert pos.abs().max() <= 1
    with pytest.raises(ValueError):
        sine_position_encoding(3, 5, 6)
    assert math.isclose(pos[0, 0].item(), math.sin((0.5 / 3) * 2 * math.pi), rel_tol=1e-6)


SHARED_PARAMS = ["query_init.weight", "input_proj.1.weight", "cross_attention_layers.1.multihead_attn.in_proj_weight",
                 "ffn_layers.0.linear2.weight"]
END_TO_END_CASES = ([(name, "classify") for name in SHARED_PARAMS + ["class_head.weight"]]
                    + [(name, "masks") for name in SHARED_PARAMS + ["mask_head.layers.0.weight"]])


@pytest.mark.parametrize("name,head", END_TO_END_CASES)
def test_end_to_end_gradient_with_masked_attention(name, head):
    decoder = _decoder(masked_attention=True).double()
    pyramid = _pyramid(dtype=torch.float64)
    text = torch.as_tensor(encode_expression("The green circle moves up", 16).vector)
    param = dict(decoder.named_parameters())[name]
    weights = torch.linspace(-1, 1, 2 * 3 * 3, dtype=torch.float64).reshape(2, 3, 3)

    def classify_readout():
        queries = decoder.decode(decoder.init_queries(text, 2), pyramid, text)
        return (decoder.classify(queries, text) * weights).sum()

    def mask_readout():
        mask_features = decoder.pixel_features(pyramid)
        queries = decoder.decode(decoder.init_queries(text, 2), pyramid, text, mask_features)
        return predict_masks(decoder.embed_masks(queries), mask_features).pow(2).mean()

    readout = classify_readout if head == "classify" else mask_readout
    finite_difference_check(readout, param, num_entries=4, seed=len(name))


def test_query_init_broadcasts_to_every_frame():
    decoder = _decoder()
    queries = decoder.init_queries(encode_expression("The red circle", 16), num_frames=5).queries
    for t in range(1, 5):
        assert torch.equal(queries[t], queries[0])


def test_lower_threshold_never_drops_a_query():
    logits = torch.randn(4, 50, 4, generator=torch.Generator().manual_seed(3)) * 3
    taus = [0.95, 0.8, 0.6, 0.4, 0.2, 0.05]
    kept = [select_queries(logits, tau) for tau in taus]
    for higher, lower in zip(kept, kept[1:]):
        assert not (higher & ~lower).any()
    assert kept[-1].sum() > kept[0].sum()


def test_decode_is_deterministic():
    decoder = _decoder(num_layers=3)
    pyramid = _pyramid()
    text = encode_expression("The red circle moves left", 16)
    a = decoder.decode(decoder.init_queries(text, 2), pyramid, text).queries
    b = decoder.decode(decoder.init_queries(text, 2), pyramid, text).queries
    assert torch.equal(a, b)

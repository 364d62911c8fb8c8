import numpy as np
import pytest

from food_vocab_seg.errors import InvalidInputError, ShapeError
from food_vocab_seg.foodlearner import EnrichedTokens, TokenKind
from food_vocab_seg.numcore import Linear, RngState, Tensor, finite_diff_check
from food_vocab_seg.segmentation import (
    OpenVocabSegmenter,
    SegTargets,
    build_prompts,
    build_text_tokens,
    classify_proposals,
    fuse,
    nearest_resize,
    pool_queries,
    proposal_class_logits,
    stage2_loss,
    static_embeddings,
)

CLASSES = ["egg", "rice", "tomato"]


@pytest.fixture
def segmenter(foodlearner, stage2_config):
    return OpenVocabSegmenter(foodlearner, 8, (2, 2), stage2_config, RngState(7))


def test_prompts_per_template():
    assert build_prompts(["egg"], "default") == [["a photo of egg"]]
    assert build_prompts(["egg", "rice"], "none") == [["egg"], ["rice"]]
    assert len(build_prompts(["egg"], "vild")[0]) == 5
    with pytest.raises(InvalidInputError):
        build_prompts([], "default")


def test_text_tokens_one_batch_per_template(clip):
    batches = build_text_tokens(clip, CLASSES, "vild")
    assert len(batches) == 5
    assert all(b.batch_size == 3 for b in batches)


def test_static_embeddings_average_templates(clip):
    table = static_embeddings(clip, CLASSES, ["a photo of {}", "{}"])
    expected = (clip.embed_prompts(["a photo of rice"])[0] + clip.embed_prompts(["rice"])[0]) / 2
    assert table.shape == (3, 8)
    assert np.allclose(table[1], expected)


def test_pool_queries(foodlearner):
    projection = Linear(8, 8, RngState(0))
    tokens = Tensor(RngState(1).normal((2, 3, 8)))
    pooled = pool_queries(EnrichedTokens(tokens, TokenKind.ENRICHED_QUERY), projection)
    assert pooled.shape == (2, 8)
    assert np.allclose(pooled.numpy(), projection(tokens.mean(axis=1)).numpy())
    with pytest.raises(InvalidInputError):
        pool_queries(EnrichedTokens(tokens, TokenKind.ENRICHED_TEXT), projection)


def test_fuse_is_an_exact_sum():
    e_hat = RngState(0).normal((2, 1, 8))
    e_static = RngState(1).normal((1, 3, 8))
    fused = fuse(Tensor(e_hat), Tensor(e_static)).numpy()
    assert np.array_equal(fused, e_hat + e_static)
    with pytest.raises(ShapeError):
        fuse(Tensor(np.ones(4)), Tensor(np.ones(8)))


def test_class_logits_scale_cosines():
    proposals = Tensor(np.array([[1.0, 0.0], [0.0, 2.0]]))
    classes = Tensor(np.array([[3.0, 0.0], [1.0, 1.0]]))
    logits = proposal_class_logits(proposals, classes, tau=100.0).numpy()
    assert logits.shape == (2, 3)
    assert np.allclose(logits[0], [100.0, 100.0 / np.sqrt(2.0), 0.0])
    probs = classify_proposals(proposals, classes, tau=100.0).numpy()
    assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-9)


def test_argmax_ignores_class_embedding_scale():
    proposals = Tensor(RngState(0).normal((4, 8)))
    classes = RngState(1).normal((3, 8))
    a = classify_proposals(proposals, Tensor(classes), tau=10.0).numpy()
    b = classify_proposals(proposals, Tensor(classes * 7.5), tau=10.0).numpy()
    assert np.array_equal(a[:, :3].argmax(axis=1), b[:, :3].argmax(axis=1))


def test_forward_shapes(segmenter, clip, images):
    e_static = static_embeddings(clip, CLASSES, "default")
    embedding, proposals = segmenter(clip.encode_image(images[:2]), e_static)
    assert embedding.e_hat.shape == (2, 8)
    assert embedding.e_fused.shape == (2, 3, 8)
    assert proposals.class_logits.shape == (2, 4, 4)
    assert proposals.mask_logits.shape == (2, 4, 8, 8)
    assert proposals.num_classes == 3
    fused = embedding.e_fused.numpy()
    assert np.array_equal(fused, embedding.e_hat.numpy()[:, None] + e_static[None])


def test_any_class_count_is_accepted(segmenter, clip, images):
    visual = clip.encode_image(images[:1])
    _, few = segmenter(visual, static_embeddings(clip, CLASSES[:1], "default"))
    _, many = segmenter(visual, static_embeddings(clip, CLASSES + ["carrot"], "default"))
    assert few.num_classes == 1 and many.num_classes == 4
    assert np.array_equal(few.mask_logits.numpy(), many.mask_logits.numpy())


def test_static_text_mode_drops_visual_knowledge(foodlearner, stage2_config, clip, images):
    config = stage2_config.model_copy(update={"static_text": True})
    segmenter = OpenVocabSegmenter(foodlearner, 8, (2, 2), config, RngState(7))
    e_static = static_embeddings(clip, CLASSES, "default")
    embedding, _ = segmenter(clip.encode_image(images[:2]), e_static)
    assert np.array_equal(embedding.e_hat.numpy(), np.zeros((2, 8)))
    assert np.array_equal(embedding.e_fused.numpy(), np.broadcast_to(e_static, (2, 3, 8)))


def test_head_rejects_other_grids(segmenter, clip):
    with pytest.raises(ShapeError):
        segmenter(clip.encode_image(np.zeros((1, 24, 24, 3), dtype=np.uint8)), np.ones((2, 8)))


def test_unbatched_visual_is_rejected(segmenter, clip, images):
    with pytest.raises(ShapeError):
        segmenter.image_informed(clip.encode_image(images[0]), np.ones((2, 8)))


def test_identical_proposal_tokens_give_identical_masks(segmenter, clip, images):
    segmenter.head.proposal_tokens.data[1] = segmenter.head.proposal_tokens.data[0]
    segmenter.head.attn_bias[0].data[1] = segmenter.head.attn_bias[0].data[0]
    masks = segmenter.predict_masks(clip.encode_image(images[:1])).numpy()
    assert np.allclose(masks[0, 0], masks[0, 1])


def test_attention_biases_are_trainable_parameters(segmenter):
    names = [name for name, _ in segmenter.named_parameters()]
    assert "head.attn_bias.0" in names


def test_end_to_end_gradient_reaches_query_tokens(segmenter, clip, images):
    visual = clip.encode_image(images[:1])
    e_static = static_embeddings(clip, CLASSES, "default")
    mask = nearest_resize(np.array([[1, 1], [2, 0]]), 8, 8)
    targets = SegTargets.from_mask(mask, {1: 0, 2: 1}, size=8)
    params = {
        "query_tokens": segmenter.foodlearner.query_tokens,
        "fusion_proj.weight": segmenter.fusion_proj.weight,
        "head.attn_bias.0": segmenter.head.attn_bias[0],
    }

    def loss():
        _, proposals = segmenter(visual, e_static)
        return stage2_loss(proposals, targets, segmenter.config).total

    report = finite_diff_check(loss, params, max_entries=6)
    assert report.passed, report.per_parameter

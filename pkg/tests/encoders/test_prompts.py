import pytest

from food_vocab_seg.encoders import DEFAULT_TEMPLATE, TEMPLATE_PRESETS, resolve_templates
from food_vocab_seg.encoders.prompts import apply_template
from food_vocab_seg.errors import TokenizerError


def test_presets_expand():
    assert resolve_templates("default") == [DEFAULT_TEMPLATE]
    assert len(resolve_templates("vild")) == 5
    assert resolve_templates("none") == []


def test_mixed_list():
    resolved = resolve_templates(["default", "{} on a plate"])
    assert resolved == [DEFAULT_TEMPLATE, "{} on a plate"]


def test_single_custom_template():
    assert resolve_templates("{} in a bowl") == ["{} in a bowl"]


@pytest.mark.parametrize("template", ["a photo", "{} and {}"])
def test_malformed_template(template):
    with pytest.raises(TokenizerError):
        resolve_templates([template])


def test_apply_template():
    assert apply_template(DEFAULT_TEMPLATE, "fried egg") == "a photo of fried egg"


def test_every_preset_has_one_placeholder():
    for templates in TEMPLATE_PRESETS.values():
        assert all(t.count("{}") == 1 for t in templates)

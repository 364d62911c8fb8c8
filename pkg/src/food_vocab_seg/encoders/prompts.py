"""Prompt templates that wrap class names before text encoding."""

from typing import Dict, List, Sequence, Union

from food_vocab_seg.errors import TokenizerError

DEFAULT_TEMPLATE = "a photo of {}"

TEMPLATE_PRESETS: Dict[str, List[str]] = {
    "none": [],
    "default": [DEFAULT_TEMPLATE],
    "vild": [
        "there is {} in the scene",
        "there is the {} in the scene",
        "this is {} in the scene",
        "this is the {} in the scene",
        "this is one {} in the scene",
    ],
    "imagenet": [
        "a bad photo of a {}",
        "a photo of many {}",
        "a photo of the hard to see {}",
        "a low resolution photo of the {}",
        "a cropped photo of the {}",
        "a close-up photo of a {}",
        "a bright photo of a {}",
        "a good photo of a {}",
        "a photo of one {}",
        "a blurry photo of the {}",
    ],
}


def resolve_templates(templates: Union[str, Sequence[str]]) -> List[str]:
    """Expand a preset name, or validate an explicit template list.

    Raises:
        TokenizerError: If a template lacks exactly one ``{}`` placeholder
    """
    if isinstance(templates, str):
        if templates in TEMPLATE_PRESETS:
            return list(TEMPLATE_PRESETS[templates])
        templates = [templates]
    resolved = []
    for template in templates:
        if template in TEMPLATE_PRESETS:
            resolved.extend(TEMPLATE_PRESETS[template])
            continue
        if template.count("{}") != 1:
            raise TokenizerError(f"Malformed template {template!r}: needs exactly one '{{}}'")
        resolved.append(template)
    return resolved


def apply_template(template: str, class_name: str) -> str:
    return template.replace("{}", class_name)


def template_words() -> List[str]:
    """Every word used by the presets, for vocabulary building."""
    return [template.replace("{}", " ") for templates in TEMPLATE_PRESETS.values() for template in templates]

"""Template-based machine utterance generation.

Each machine act has one or more surface templates; selection maximizes the
Laplace-smoothed success rate (successes+1)/(uses+2), where a template is
credited a success iff the conversation it was used in ended in a placed
order, the same delayed reward that trains everything else.

Ask templates are grouped per slot through the schema's prompt_key: a
template whose id is "<prompt_key>" or "<prompt_key>.<variant>" belongs to
that slot's group.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from .domain import MACHINE_ACTS, SlotSchema

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")
EXTRA_PLACEHOLDERS = ("product_name", "price", "order_summary")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    id: str
    act_kind: str
    pattern: str
    uses: int = 0
    successes: int = 0

    @property
    def group(self) -> str:
        return self.id.split(".", 1)[0]

    def smoothed_rate(self) -> float:
        return (self.successes + 1) / (self.uses + 2)


def render(t: Template, bindings: dict[str, str]) -> str:
    """Substitute every {placeholder}; a missing binding is an error naming
    the placeholder."""

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise TemplateError(f"unbound placeholder: {name}")
        return bindings[name]

    out = _PLACEHOLDER_RE.sub(sub, t.pattern)
    leftover = _PLACEHOLDER_RE.search(out)
    if leftover:
        raise TemplateError(f"unbound placeholder: {leftover.group(1)}")
    return out


def select_template(act_kind: str, library: list[Template]) -> Template:
    """Argmax of the smoothed success rate among templates for the act;
    ties go to the lowest id."""
    candidates = [t for t in library if t.act_kind == act_kind]
    if not candidates:
        raise TemplateError(f"no template for act {act_kind}")
    best = candidates[0]
    for t in candidates[1:]:
        rate, best_rate = t.smoothed_rate(), best.smoothed_rate()
        if rate > best_rate or (rate == best_rate and t.id < best.id):
            best = t
    return best


def ask_templates(library: list[Template], prompt_key: str) -> list[Template]:
    return [t for t in library if t.act_kind == "ask" and t.group == prompt_key]


def record_outcome(t: Template, success: bool) -> Template:
    return replace(t, uses=t.uses + 1, successes=t.successes + (1 if success else 0))


def load_templates(path: str, schema: SlotSchema) -> list[Template]:
    """Load the seed template library and validate placeholders and
    coverage: every machine act kind needs at least one template, and every
    required slot's prompt_key needs an ask group."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    allowed = set(schema.names) | set(EXTRA_PLACEHOLDERS)
    templates = []
    seen_ids: set[str] = set()
    for entry in doc:
        t = Template(id=entry["id"], act_kind=entry["act_kind"], pattern=entry["pattern"])
        if t.id in seen_ids:
            raise TemplateError(f"duplicate template id {t.id}")
        seen_ids.add(t.id)
        if t.act_kind not in MACHINE_ACTS:
            raise TemplateError(f"template {t.id} has unknown act kind {t.act_kind}")
        for name in _PLACEHOLDER_RE.findall(t.pattern):
            if name not in allowed:
                raise TemplateError(f"template {t.id} uses unknown placeholder {name}")
        # transcript reconstruction recognizes recommendations by their
        # quoted price, so every recommend template must carry one
        if t.act_kind == "recommend" and "{price}" not in t.pattern:
            raise TemplateError(f"recommend template {t.id} must reference {{price}}")
        templates.append(t)
    for kind in MACHINE_ACTS:
        if not any(t.act_kind == kind for t in templates):
            raise TemplateError(f"no template for act {kind}")
    for slot in schema.slots:
        if slot.required and not ask_templates(templates, slot.prompt_key):
            raise TemplateError(f"no ask template group {slot.prompt_key} for slot {slot.name}")
    return templates


class TemplateLibrary:
    """Mutable counter store around the immutable templates; the session
    owner credits outcomes at conversation end."""

    def __init__(self, templates: list[Template]):
        self._templates = {t.id: t for t in templates}

    def snapshot(self) -> list[Template]:
        return list(self._templates.values())

    def get(self, template_id: str) -> Template:
        return self._templates[template_id]

    def credit(self, template_ids: list[str], success: bool) -> None:
        for tid in template_ids:
            self._templates[tid] = record_outcome(self._templates[tid], success)

    def stats(self) -> dict[str, dict[str, int]]:
        return {
            tid: {"uses": t.uses, "successes": t.successes}
            for tid, t in sorted(self._templates.items())
        }

    def load_stats(self, stats: dict[str, dict[str, int]]) -> None:
        for tid, counts in stats.items():
            if tid in self._templates:
                self._templates[tid] = replace(
                    self._templates[tid], uses=counts["uses"], successes=counts["successes"]
                )

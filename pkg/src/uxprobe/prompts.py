"""Prompt templates shipped as editable text files under ``assets/prompts``.

Placeholders look like ``{task}``; unknown names are left untouched so JSON
examples inside a template survive substitution.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

ASSETS = Path(__file__).parent / "assets"
PROMPT_DIR = ASSETS / "prompts"
_PLACEHOLDER = re.compile(r"\{(\w+)\}")


@dataclass(frozen=True)
class TemplateSet:
    version: str
    texts: dict
    digest: str

    def render(self, name: str, **values) -> str:
        template = self.texts[name]
        return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]) if m.group(1) in values else m.group(0), template)


def load_templates(directory=None) -> TemplateSet:
    directory = Path(directory) if directory else PROMPT_DIR
    texts = {p.stem: p.read_text(encoding="utf-8") for p in sorted(directory.glob("*.txt")) if p.stem != "VERSION"}
    version = (directory / "VERSION.txt").read_text().strip() if (directory / "VERSION.txt").exists() else "0"
    h = hashlib.sha256(f"v{version}".encode())
    for name in sorted(texts):
        h.update(b"\0" + name.encode() + b"\0" + texts[name].encode())
    return TemplateSet(version, texts, f"v{version}:" + h.hexdigest()[:16])

"""Shared helpers for the test suite."""

from __future__ import annotations

from catat import check_stages, parse
from catat.corpus import corpus_path, provide_corpus


def fixture_source(name: str) -> str:
    return corpus_path(name).read_text(encoding="utf-8")


def staged_fixture(name: str, levels: int = 2):
    return check_stages(parse(fixture_source(name)), levels)


def all_checkable_fixture_names() -> list[str]:
    return [f.name for f in provide_corpus() if f.first("check") == "ok"]

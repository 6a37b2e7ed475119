from pathlib import Path

from wire_doc import generate

DOCS = Path(__file__).resolve().parent.parent / "docs"


def test_wire_format_doc_is_current():
    assert (DOCS / "wire-format.md").read_text() == generate()


import json
from pathlib import Path

import pytest

from prefail.cli import corpus_dir
from prefail.syntax import parse_program

ODD_EVEN = """
even(zero).
even(s(X)) :- odd(X).
odd(s(X)) :- even(X).
odd_even :- even(X), even(s(X)).
"""

# the two-clause example from the introduction: even/odd with query even&odd
EVEN_ODD_INTRO = """
even(zero).
even(s(X)) :- odd(X).
odd(s(X)) :- even(X).
q :- even(X), odd(X).
"""


@pytest.fixture(scope="session")
def corpus():
    manifest = json.loads((corpus_dir() / "manifest.json").read_text())
    programs = {}
    for entry in manifest["programs"]:
        text = (corpus_dir() / entry["file"]).read_text()
        programs[entry["name"]] = (entry, text)
    return programs


def load(corpus, name):
    entry, text = corpus[name]
    program, query = parse_program(text, entry.get("query"))
    return entry, program, query


@pytest.fixture
def odd_even():
    return parse_program(ODD_EVEN)


@pytest.fixture
def even_odd_intro():
    return parse_program(EVEN_ODD_INTRO, "q")

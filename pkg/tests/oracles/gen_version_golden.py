"""Build the version-ordering golden table with ``packaging.version``.

Offline only; the test suite reads the frozen JSON and never imports
``packaging``::

    python tests/oracles/gen_version_golden.py > tests/fixtures/version_golden.json
"""

import itertools
import json
import random

from packaging.version import Version

HAND_PICKED = [
    ("1.10.0", "1.9.0"), ("1.0rc1", "1.0"), ("1.0", "1.0.0"), ("1.0.dev1", "1.0a1"),
    ("1.0a1.dev1", "1.0a1"), ("1.0.post1.dev1", "1.0"), ("1.0.post1.dev1", "1.0.post1"),
    ("2!1.0", "3.0"), ("1!0.1", "2!0.0.1"), ("v1.2", "1.2"), ("1.0RC2", "1.0rc10"),
    ("0.8.5", "0.9.1"), ("1.24.0", "1.26.4"), ("2.0b3", "2.0a12"), ("1.0.0.0.1", "1.0"),
    ("10.0", "9.99.99"), ("0.0.1", "0.0.2"), ("1.2.3.post4", "1.2.3.post10"),
    ("1.0.dev2", "1.0.dev10"), ("1.0", "1.0.post0"),
]


def random_version(rng):
    parts = [str(rng.choice([0, 0, 1, 1, 2, 3, 9, 10, 11, 24, 26]))
             for _ in range(rng.choice([1, 2, 2, 3, 3, 3, 4]))]
    text = ".".join(parts)
    if rng.random() < 0.1:
        text = f"{rng.choice([1, 2])}!{text}"
    if rng.random() < 0.3:
        text += f"{rng.choice(['a', 'b', 'rc'])}{rng.choice([0, 1, 2, 10])}"
    if rng.random() < 0.2:
        text += f".post{rng.choice([0, 1, 3])}"
    if rng.random() < 0.2:
        text += f".dev{rng.choice([0, 1, 5])}"
    return text


def main():
    rng = random.Random(20260101)
    pairs = list(HAND_PICKED)
    pool = [random_version(rng) for _ in range(60)]
    pairs += [(a, a) for a in pool[:10]]
    pairs += list(itertools.islice(itertools.combinations(pool, 2), 0, None, 9))[:200]
    table = []
    for a, b in pairs:
        va, vb = Version(a), Version(b)
        table.append({"a": a, "b": b, "cmp": (va > vb) - (va < vb)})
    print(json.dumps(table, indent=1))


if __name__ == "__main__":
    main()

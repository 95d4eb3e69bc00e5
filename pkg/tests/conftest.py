import random

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from abusegraph.graph import EdgeData, build_graph
from abusegraph.ingest import ABUSIVE, NON_ABUSIVE, Conversation, Message

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def random_graph(rng: random.Random, n: int, p: float = 0.3, max_weight: int = 6, gid: str = "g"):
    edges = {}
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                edges[u, v] = EdgeData(rng.randint(1, max_weight), rng.choice((1, -1)))
    authors = {v: f"user{rng.randint(0, 3 * n)}" for v in range(n)}
    return build_graph(gid, edges, rng.randrange(n), authors=authors, vertices=range(n))


def relabel(g, perm: dict[int, int], gid=None):
    """Same graph with vertex ids renamed by ``perm``."""
    edges = {(perm[u], perm[v]): e for (u, v), e in g.edges.items()}
    authors = {perm[v]: g.attributes[v].author for v in g.vertices}
    return build_graph(gid or g.id, edges, perm[g.targeted_vertex], authors=authors,
                       vertices=[perm[v] for v in g.vertices])


@st.composite
def graphs(draw, max_n=9):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_n))
    p = draw(st.sampled_from([0.15, 0.3, 0.5]))
    return random_graph(random.Random(seed), n, p)


def random_conversation(rng: random.Random, n_msgs: int, n_authors: int, cid="c"):
    authors = [f"a{rng.randrange(n_authors)}" for _ in range(n_msgs)]
    target = rng.randrange(n_msgs)
    words = ["good", "idiot", "fleet", "thanks", "stupid", "hi"]
    msgs = tuple(
        Message(a, 10 * i, " ".join(rng.choice(words) for _ in range(rng.randint(0, 4))), i == target)
        for i, a in enumerate(authors)
    )
    return Conversation(cid, msgs, rng.choice((ABUSIVE, NON_ABUSIVE)), target)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

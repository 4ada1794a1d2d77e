import hypothesis.strategies as st
import pytest
from hypothesis import given

from causal_icc.graph import (
    NOISE_PREFIX,
    CycleError,
    Dag,
    GraphError,
    UnknownNode,
    ancestors,
    augment,
    topo_sort,
)


@st.composite
def random_dags(draw, max_nodes=8):
    n = draw(st.integers(1, max_nodes))
    names = [f"V{i}" for i in range(n)]
    perm = draw(st.permutations(names))
    parents = {}
    for i, v in enumerate(perm):
        parents[v] = [u for u in perm[:i] if draw(st.booleans())]
    # Declare nodes in a different order than the hidden causal order.
    declared = draw(st.permutations(names))
    return Dag(declared, parents)


def test_chain_order():
    assert topo_sort(Dag(["X", "Y", "Z"], {"Y": ["X"], "Z": ["Y"]})) == ["X", "Y", "Z"]


def test_single_node():
    assert topo_sort(Dag(["A"])) == ["A"]


def test_cycle_names_a_node():
    with pytest.raises(CycleError) as info:
        Dag(["X", "Y"], {"X": ["Y"], "Y": ["X"]})
    assert info.value.node in {"X", "Y"}


def test_ties_follow_declaration_order():
    assert topo_sort(Dag(["B", "A", "C"], {"C": ["A"]})) == ["B", "A", "C"]
    assert topo_sort(Dag(["C", "B", "A"], {"C": ["A"]})) == ["B", "A", "C"]


def test_structural_errors():
    with pytest.raises(GraphError):
        Dag(["X", "X"])
    with pytest.raises(GraphError):
        Dag(["X"], {"X": ["X"]})
    with pytest.raises(UnknownNode):
        Dag(["X"], {"X": ["Q"]})
    with pytest.raises(GraphError):
        Dag(["X", "Y"], {"Y": ["X", "X"]})
    with pytest.raises(GraphError):
        Dag(["bad name"])
    with pytest.raises(GraphError):
        Dag(["noise::X"])


def test_augment_chain():
    aug = augment(Dag(["X", "Y"], {"Y": ["X"]}))
    assert set(aug.dag.nodes) == {"noise::X", "noise::Y", "X", "Y"}
    assert set(aug.dag.edges()) == {("noise::X", "X"), ("noise::Y", "Y"), ("X", "Y")}


def test_augment_counts():
    assert len(augment(Dag(["A", "B"])).dag.edges()) == 2
    collider = augment(Dag(["X", "Y", "Z"], {"Z": ["X", "Y"]}))
    assert len(collider.noise_nodes) == 3
    assert len(collider.dag.edges()) == 5


def test_ancestors_examples():
    chain = Dag(["X", "Y", "Z"], {"Y": ["X"], "Z": ["Y"]})
    assert ancestors(chain, "Z") == {"X", "Y"}
    assert ancestors(chain, "X") == set()
    assert ancestors(Dag(["X", "Y", "Z"], {"Z": ["X", "Y"]}), "Z") == {"X", "Y"}
    with pytest.raises(UnknownNode):
        ancestors(chain, "Q")


@given(random_dags())
def test_topo_sort_is_a_valid_permutation(dag):
    order = topo_sort(dag)
    assert sorted(order) == sorted(dag.nodes)
    pos = {n: i for i, n in enumerate(order)}
    assert all(pos[u] < pos[v] for u, v in dag.edges())


@given(random_dags())
def test_augmented_noise_precedes_node(dag):
    aug = augment(dag)
    order = topo_sort(aug.dag)
    pos = {n: i for i, n in enumerate(order)}
    for n in dag.nodes:
        noise = NOISE_PREFIX + n
        assert pos[noise] < pos[n]
        assert aug.dag.parents[noise] == ()
        assert aug.dag.children(noise) == (n,)
    assert len(aug.dag.nodes) == 2 * len(dag.nodes)


@given(random_dags())
def test_ancestors_match_fixed_point(dag):
    for node in dag.nodes:
        reach = set(dag.parents[node])
        while True:
            grown = reach | {p for r in reach for p in dag.parents[r]}
            if grown == reach:
                break
            reach = grown
        assert ancestors(dag, node) == reach


@given(random_dags())
def test_children_and_descendants_are_consistent(dag):
    for n in dag.nodes:
        for c in dag.children(n):
            assert n in dag.parents[c]
        assert all(n in dag.ancestors(d) for d in dag.descendants(n))

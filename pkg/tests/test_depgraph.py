import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sessionsuite.depgraph import (
    PageGraph,
    PageNode,
    SiteModel,
    ValueSpec,
    derive_data_edges,
    exercised_data_edges,
    load_site_model,
    model_from_dict,
    model_to_dict,
    node_counts,
    session_counts,
)
from sessionsuite.errors import DanglingEdge, SchemaViolation
from sessionsuite.ingest import Request, UserSession
from sessionsuite.profile import URLName

from oracles import printed_page_counts

def page(url, defines=(), references=()):
    return PageNode(URLName(url), frozenset(defines), frozenset(references))


def simple_paths(succ, src, dst):
    """Every simple path src -> ... -> dst, by exhaustive DFS."""
    out = []

    def walk(node, path):
        for nxt in succ.get(node, ()):
            if nxt == dst:
                out.append(path + [nxt])
            elif nxt not in path:
                walk(nxt, path + [nxt])

    walk(src, [src])
    return out


def oracle_data_edges(model):
    succ = {}
    for a, b in model.link_edges:
        succ.setdefault(a, []).append(b)
    nodes = {n.key: n for n in model.nodes}
    found = set()
    for b in model.nodes:
        for a in model.nodes:
            if a.key == b.key:
                continue
            for v in b.defines & a.references:
                paths = simple_paths(succ, b.key, a.key)
                if any(all(v not in nodes[x].defines for x in p[1:-1]) for p in paths):
                    found.add((b.key, a.key))
    return found


def test_load_bookstore(bookstore_graph):
    assert len(bookstore_graph.nodes) == 10
    assert bookstore_graph.nodes["/admin.jsp?action"].param_specs[0][0] == "action"


def test_dangling_edge():
    obj = {"nodes": [{"url": "/a"}], "link_edges": [["/a", "/b"]]}
    with pytest.raises(DanglingEdge):
        model_from_dict(obj)


def test_schema_errors():
    with pytest.raises(SchemaViolation):
        model_from_dict({"nodes": [{"url": "a"}]})
    with pytest.raises(SchemaViolation):
        model_from_dict({"nodes": [{"url": "/a"}, {"url": "/a"}]})
    with pytest.raises(SchemaViolation):
        load_site_model(io.StringIO("{"))


def test_zero_edges_all_counts_zero():
    g = PageGraph(SiteModel([page("/a"), page("/b")], []))
    assert set(node_counts(g).values()) == {(0, 0)}


def test_model_round_trip(bookstore_graph):
    m = bookstore_graph.model
    again = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    assert again == m


def test_version_is_content_digest():
    a = SiteModel([page("/a"), page("/b")], [("/a", "/b")])
    b = SiteModel([page("/a"), page("/b")], [("/a", "/b")])
    c = SiteModel([page("/a"), page("/b")], [("/b", "/a")])
    assert a.version == b.version != c.version


def test_derive_direct_link():
    m = SiteModel([page("/b", {"v"}), page("/a", references={"v"})], [("/b", "/a")])
    assert derive_data_edges(m) == [("/b", "/a")]


def test_derive_killed():
    m = SiteModel(
        [page("/b", {"v"}), page("/c", {"v"}), page("/a", references={"v"})],
        [("/b", "/c"), ("/c", "/a")],
    )
    assert ("/b", "/a") not in derive_data_edges(m)
    assert ("/c", "/a") in derive_data_edges(m)


def test_bookstore_derived_edges_match_oracle(bookstore_graph):
    model = bookstore_graph.model
    assert set(derive_data_edges(model)) == oracle_data_edges(model)
    # the one data edge of the fixture is declared
    assert bookstore_graph.data_edges == [("/ShoppingCartRecord.jsp", "/ShoppingCart.jsp")]


def test_demo_app_page_counts(demo_graph):
    counts = node_counts(demo_graph)
    assert {k: tuple(v) for k, v in counts.items()} == printed_page_counts()


def test_self_loop_only_counts_zero():
    g = PageGraph(SiteModel([page("/a", {"v"}, {"v"})], [("/a", "/a")], [("/a", "/a")]))
    assert node_counts(g)["/a"] == (0, 0)


def sess(*urls):
    return UserSession("x", [Request(u) for u in urls])


def test_session_counts_derived_spot_check(demo_graph):
    rows = printed_page_counts()
    pages = ["/Index.jsp", "/Product.jsp", "/Fields.jsp"]
    expected = (sum(rows[p][0] for p in pages), sum(rows[p][1] for p in pages))
    assert expected == (1, 5)
    assert session_counts(sess(*pages), demo_graph)[:2] == expected


def test_session_counts_user9_shape(demo_graph):
    # a session whose distinct pages sum to the printed User9 row
    pages = ["/Index.jsp", "/Product.jsp", "/Engg.jsp", "/Business.jsp",
             "/BusinessDetails.jsp", "/Branches.jsp", "/Fields.jsp", "/Index.jsp"]
    assert session_counts(sess(*pages), demo_graph)[:2] == (1, 9)


def test_session_counts_dedup_and_unknown(demo_graph):
    once = session_counts(sess("/Index.jsp"), demo_graph)
    twice = session_counts(sess("/Index.jsp", "/Index.jsp"), demo_graph)
    assert once[:2] == twice[:2] == (0, 3)
    c = session_counts(sess("/gone.jsp"), demo_graph)
    assert c[:2] == (0, 0) and c.unknown == (URLName("/gone.jsp"),)


def test_resolve_falls_back_to_unique_path(bookstore_graph):
    assert bookstore_graph.resolve(Request("/admin.jsp")) == "/admin.jsp?action"
    assert bookstore_graph.resolve(Request("/MyInfo.jsp", (("member_id", "3"),))) == "/MyInfo.jsp?member_id"
    assert bookstore_graph.resolve(Request("/nope.jsp")) is None


def test_value_specs_draw_in_domain():
    rng = random.Random(0)
    for _ in range(50):
        assert 3 <= int(ValueSpec("int", lo=3, hi=5).draw(rng)) <= 5
        assert ValueSpec("enum", choices=("x", "y")).draw(rng) in {"x", "y"}
        t = ValueSpec("text", pattern="id-##?").draw(rng)
        assert t[:3] == "id-" and t[3:5].isdigit() and t[5].islower()
    with pytest.raises(ValueError):
        ValueSpec("int", lo=5, hi=1)
    with pytest.raises(ValueError):
        ValueSpec("enum", choices=())


def test_exercised_def_use():
    m = SiteModel(
        [page("/b", {"v"}), page("/b2", {"v"}), page("/a", references={"v"}), page("/x")],
        [], [("/b", "/a")],
    )
    g = PageGraph(m, derive=False)
    assert exercised_data_edges(["/b", "/a"], g) == {("/b", "/a")}
    assert exercised_data_edges(["/b", "/x", "/a"], g) == {("/b", "/a")}
    assert exercised_data_edges(["/b", "/b2", "/a"], g) == set()
    assert exercised_data_edges(["/a", "/b"], g) == set()


@st.composite
def small_models(draw):
    n = draw(st.integers(1, 6))
    keys = [f"/n{i}" for i in range(n)]
    nodes = [
        PageNode(
            URLName(k),
            frozenset(draw(st.sets(st.sampled_from("uvw"), max_size=2))),
            frozenset(draw(st.sets(st.sampled_from("uvw"), max_size=2))),
        )
        for k in keys
    ]
    links = draw(st.lists(st.tuples(st.sampled_from(keys), st.sampled_from(keys)), unique=True, max_size=12))
    return SiteModel(nodes, links)


@settings(max_examples=300)
@given(small_models())
def test_derive_sound_and_complete(model):
    derived = derive_data_edges(model)
    assert len(derived) == len(set(derived))
    assert set(derived) == oracle_data_edges(model)


@settings(max_examples=200)
@given(small_models(), st.data())
def test_count_properties(model, data):
    g = PageGraph(model)
    counts = node_counts(g)
    assert sum(c.ldc for c in counts.values()) == len({e for e in g.link_edges if e[0] != e[1]})
    assert sum(c.ddc for c in counts.values()) == len({e for e in g.data_edges if e[0] != e[1]})

    k = data.draw(st.sampled_from(g.order))
    looped = SiteModel(model.nodes, list(model.link_edges) + [(k, k)], model.data_edges)
    assert node_counts(PageGraph(looped)) == counts

    extra = data.draw(st.tuples(st.sampled_from(g.order), st.sampled_from(g.order)))
    grown = SiteModel(model.nodes, list(dict.fromkeys(list(model.link_edges) + [extra])))
    grown_counts = node_counts(PageGraph(grown))
    assert all(grown_counts[n].ldc >= counts[n].ldc for n in g.order)
    assert set(derive_data_edges(model)) <= set(derive_data_edges(grown))

"""Compile expression trees to SPARQL and run them against a remote endpoint."""
from __future__ import annotations

import itertools
import time

import requests

from .errors import MalformedResponse, RemoteTimeout, TransportError
from .expression import And, Arg, Cmp, Count, Join, Start, Tc, Tree, TypeConstraint, format_number
from .kb import TYPE_RELATION, ResultSet, end_relation, inverse, is_literal

XSD_DECIMAL = "<http://www.w3.org/2001/XMLSchema#decimal>"
_OPS = {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}


class _Compiler:
    def __init__(self, iri_prefix, type_relation):
        self.prefix = iri_prefix
        self.type_relation = type_relation
        self.counter = itertools.count()

    def fresh(self):
        return f"?x{next(self.counter)}"

    def term(self, token):
        if is_literal(token):
            return token
        return f"<{self.prefix}{token}>"

    def edge(self, subj, relation, obj):
        """Triple pattern for ``obj`` reached from ``subj`` along ``relation``."""
        bare, inv = inverse(relation)
        if inv:
            subj, obj = obj, subj
        return f"{subj} {self.term(bare)} {obj} ."

    def pattern(self, node, var) -> list[str]:
        """Clauses binding ``var`` to the denotation of ``node``."""
        if isinstance(node, Join):
            bare, inv = inverse(node.relation)
            compound = not isinstance(node.child, Start)
            sub = self.fresh() if compound else self.term(node.child.token)
            head = f"{sub} {self.term(bare)} {var} ." if inv else f"{var} {self.term(bare)} {sub} ."
            return [head] + (self.pattern(node.child, sub) if compound else [])
        if isinstance(node, And):
            return self.pattern(node.left, var) + self.pattern(node.right, var)
        if isinstance(node, TypeConstraint):
            return self.pattern(node.child, var) + [
                f"{var} {self.term(self.type_relation)} {self.term(node.type)} ."
            ]
        if isinstance(node, Cmp):
            val = self.fresh()
            return self.pattern(node.child, var) + [
                self.edge(var, node.relation, val),
                f"FILTER({XSD_DECIMAL}(STR({val})) {_OPS[node.mode]} {format_number(node.number)})",
            ]
        if isinstance(node, Tc):
            val = self.fresh()
            clauses = self.pattern(node.child, var) + [self.edge(var, node.relation, val)]
            return clauses + self.time_filter(var, node.relation, val, node.time)
        if isinstance(node, Arg):
            val = self.fresh()
            best = self.fresh()
            inner_var = self.fresh()
            inner_val = self.fresh()
            agg = "MAX" if node.mode == "MAX" else "MIN"
            sub = self.pattern(node.child, inner_var) + [
                self.edge(inner_var, node.relation, inner_val),
                f"FILTER(isNumeric({XSD_DECIMAL}(STR({inner_val}))))",
            ]
            return self.pattern(node.child, var) + [
                self.edge(var, node.relation, val),
                f"{{ SELECT ({agg}({XSD_DECIMAL}(STR({inner_val}))) AS {best}) WHERE {{ {' '.join(sub)} }} }}",
                f"FILTER({XSD_DECIMAL}(STR({val})) = {best})",
            ]
        raise TypeError(f"cannot compile {node!r}")

    def time_filter(self, var, relation, val, t):
        if t == "NOW":
            bare, inv = inverse(relation)
            end = end_relation(bare)
            if end is None or inv:
                return []
            return [f"FILTER NOT EXISTS {{ {var} {self.term(end)} ?end_{val[1:]} . }}"]
        cond = f'STR({val}) = "{t}"'
        if len(t) == 4:
            cond = f'({cond} || SUBSTR(STR({val}), 1, 4) = "{t}")'
        return [f"FILTER({cond})"]


def to_sparql(tree: Tree, iri_prefix: str = "", type_relation: str = TYPE_RELATION) -> str:
    """One SELECT query with the same answers as :func:`kb.evaluate`.

    Variables are ``?x0, ?x1, ...`` in pre-order; the answer variable is ``?x0``.
    """
    c = _Compiler(iri_prefix, type_relation)
    if isinstance(tree, Count):
        var = c.fresh()
        body = " ".join(c.pattern(tree.child, var))
        return f"SELECT (COUNT(DISTINCT {var}) AS ?cnt) WHERE {{ {body} }}"
    var = c.fresh()
    body = " ".join(c.pattern(tree, var))
    return f"SELECT DISTINCT {var} WHERE {{ {body} }}"


def _term_from_binding(b, iri_prefix):
    kind, value = b.get("type"), b.get("value")
    if value is None:
        raise MalformedResponse(f"binding without value: {b!r}")
    if kind == "uri":
        return value[len(iri_prefix):] if iri_prefix and value.startswith(iri_prefix) else value
    if kind in ("literal", "typed-literal"):
        return f'"{value}"'
    if kind == "bnode":
        return "_:" + value
    raise MalformedResponse(f"unknown binding type {kind!r}")


def parse_results(payload, iri_prefix: str = "") -> ResultSet:
    """Turn ``application/sparql-results+json`` into a ResultSet."""
    try:
        variables = payload["head"]["vars"]
        rows = payload["results"]["bindings"]
    except (KeyError, TypeError) as e:
        raise MalformedResponse(f"not a SPARQL JSON result: missing {e}") from None
    if variables == ["cnt"]:
        if len(rows) != 1 or "cnt" not in rows[0]:
            raise MalformedResponse("COUNT query must return exactly one row")
        try:
            return ResultSet(number=int(rows[0]["cnt"]["value"]))
        except (KeyError, ValueError) as e:
            raise MalformedResponse(f"bad count value: {e}") from None
    if not variables:
        raise MalformedResponse("result has no variables")
    var = variables[0]
    return ResultSet.of(_term_from_binding(r[var], iri_prefix) for r in rows if var in r)


def execute_remote(endpoint: str, query: str, timeout: float = 30.0, iri_prefix: str = "",
                   session: requests.Session | None = None) -> ResultSet:
    """POST ``query`` to a SPARQL endpoint and parse the JSON results.

    ``timeout`` bounds the whole call, not just each socket read.
    """
    http = session or requests
    started = time.monotonic()
    try:
        resp = http.post(
            endpoint,
            data={"query": query},
            headers={"Accept": "application/sparql-results+json"},
            timeout=timeout,
        )
    except requests.Timeout as e:
        raise RemoteTimeout(f"query exceeded {timeout}s") from e
    except requests.RequestException as e:
        raise TransportError(str(e)) from e
    if time.monotonic() - started > timeout:
        raise RemoteTimeout(f"query exceeded {timeout}s")
    if resp.status_code != 200:
        raise TransportError(f"endpoint returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
    except ValueError as e:
        raise MalformedResponse(f"response is not JSON: {e}") from None
    return parse_results(payload, iri_prefix)

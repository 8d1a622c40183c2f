"""Convert a dependency parse into a linear program of span steps.

Simplification keeps one node per immediate child of the root (subtree
tokens merged in original word order) and absorbs the root word into its
immediate succeeding child. The left-most node becomes the root clause;
the remaining nodes become steps referencing it; extra terminals are
collapsed left-to-right so the final step keeps at most 2 references.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import DepTree


@dataclass
class ProgramStep:
    span: tuple[int, ...]          # query token indices, ascending
    refs: list[int] = field(default_factory=list)


@dataclass
class FinalStep:
    root_clause: tuple[int, ...]
    refs: list[int] = field(default_factory=list)


@dataclass
class Program:
    steps: list[ProgramStep]
    final: FinalStep

    def validate(self):
        for i, step in enumerate(self.steps):
            if not step.span:
                raise ValueError(f"step {i} has an empty span")
            for r in step.refs:
                if not 0 <= r < i:
                    raise ValueError(f"step {i} references non-earlier step {r}")
        if not 1 <= len(self.final.refs) <= 2:
            raise ValueError("final step needs 1 or 2 references")
        referenced = {r for s in self.steps for r in s.refs}
        for r in self.final.refs:
            if r >= len(self.steps):
                raise ValueError("final step references unknown step")
            if r in referenced and len(self.steps) > 1:
                raise ValueError(f"final reference {r} is not a leaf step")
        if self.final.root_clause != self.steps[0].span:
            raise ValueError("root clause must equal the first step's span")

    def span_tokens(self, tokens: list[str], span: tuple[int, ...]) -> list[str]:
        return [tokens[i] for i in span]


def _subtree(tree: DepTree, idx: int) -> list[int]:
    out = []
    stack = [idx]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(tree.children(node))
    return sorted(out)


def simplify_parse(tree: DepTree, query_tokens: list[str]) -> list[tuple[int, ...]]:
    """One node per immediate child of the root, in original word order.

    The root word itself is merged into the first node that starts after
    it (its immediate succeeding child); a root with no children yields a
    single node covering the whole query.
    """
    if len(tree.heads) != len(query_tokens):
        raise ValueError("tree size must match query length")
    root = tree.root
    kids = tree.children(root)
    if not kids:
        return [tuple(range(len(query_tokens)))]
    nodes = sorted((_subtree(tree, k) for k in kids), key=lambda n: n[0])
    target = None
    for node in nodes:
        if node[0] > root:
            target = node
            break
    if target is None:
        target = nodes[-1]
    target.append(root)
    target.sort()
    return [tuple(n) for n in nodes]


def build_program(nodes: list[tuple[int, ...]]) -> Program:
    """Left-most node is step 1 and root clause; every other node becomes a
    step referencing it. Extra terminals beyond 2 are collapsed left-to-right
    into the second terminal."""
    if not nodes:
        raise ValueError("need at least one node")
    if len(nodes) == 1:
        step = ProgramStep(nodes[0])
        prog = Program([step], FinalStep(nodes[0], [0]))
    else:
        terminals = list(nodes[1:])
        if len(terminals) > 2:
            merged = sorted(t for node in terminals[1:] for t in node)
            terminals = [terminals[0], tuple(merged)]
        steps = [ProgramStep(nodes[0])]
        for term in terminals:
            steps.append(ProgramStep(tuple(term), refs=[0]))
        prog = Program(steps, FinalStep(nodes[0], list(range(1, len(steps)))))
    prog.validate()
    return prog


def parse_to_program(tree: DepTree, query_tokens: list[str]) -> Program:
    return build_program(simplify_parse(tree, query_tokens))


# verbs the mini-parser treats as clause roots in synthetic queries
_VERBS = {"was", "were", "did", "is", "are", "had", "have", "do", "does"}


def mini_parse(query_tokens: list[str]) -> DepTree:
    """Deterministic stand-in for an external dependency parser.

    The first verb-like token (searched from position 1) becomes the root;
    tokens before it form one subtree headed by the first token, tokens
    after it form another headed by the token right after the verb. Queries
    with no recognizable verb get a flat tree rooted at the first token.
    """
    n = len(query_tokens)
    if n == 1:
        return DepTree([0], ["root"])
    verb = None
    for i in range(1, n - 1):
        if query_tokens[i].lower() in _VERBS:
            verb = i
            break
    heads = [0] * n
    labels = ["dep"] * n
    if verb is None:
        heads[0] = 0
        labels[0] = "root"
        for i in range(1, n):
            heads[i] = 1
        return DepTree(heads, labels)
    heads[verb] = 0
    labels[verb] = "root"
    heads[0] = verb + 1
    labels[0] = "nsubj"
    for i in range(1, verb):
        heads[i] = 1
    post = verb + 1
    heads[post] = verb + 1
    labels[post] = "obj"
    for i in range(post + 1, n):
        heads[i] = post + 1
    return DepTree(heads, labels)

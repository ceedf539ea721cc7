"""Test cases: concrete argument vectors plus how they were produced."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from . import values as V

STRING = "String"
UNKNOWN = "Unknown"
_JSON_TYPES = {"Int": "int", "Str": "string", "Bool": "bool", "Null": "null"}
_FROM_JSON = {v: k for k, v in _JSON_TYPES.items()}


@dataclass(frozen=True)
class TestCase:
    id: int
    args: tuple
    symbolic: tuple[int, ...] = ()       # parameter indices treated as symbolic
    provenance: tuple = ("RandomSeed",)  # or ("NegatedBranch", parentId, branchIndex)
    generation: int = 0
    function: str = ""
    bound: int = field(default=0, compare=False)  # first branch index its children may negate

    __test__ = False  # not a pytest class

    @property
    def bindings(self) -> dict[int, bytes]:
        """Symbol id to string; symbol ids number the symbolic params in order."""
        return {sid: self.args[p] for sid, p in enumerate(self.symbolic)}

    def with_bindings(self, model: dict[int, bytes], **changes) -> "TestCase":
        args = list(self.args)
        for sid, p in enumerate(self.symbolic):
            if sid in model:
                args[p] = model[sid]
        return TestCase(changes.pop("id", self.id), tuple(args), self.symbolic,
                        changes.pop("provenance", self.provenance),
                        changes.pop("generation", self.generation), self.function,
                        changes.pop("bound", self.bound))

    def to_json(self) -> dict:
        args = []
        for a in self.args:
            type_, text = V.encode_value(a)
            args.append({"type": _JSON_TYPES[type_], "value": "" if a == b"" else text})
        prov = {"kind": self.provenance[0]}
        if self.provenance[0] == "NegatedBranch":
            prov.update(parentId=self.provenance[1], branchIndex=self.provenance[2])
        return {"id": self.id, "function": self.function, "generation": self.generation,
                "provenance": prov, "symbolic": list(self.symbolic), "args": args}

    @classmethod
    def from_json(cls, data: dict) -> "TestCase":
        args = []
        for a in data["args"]:
            type_ = _FROM_JSON[a["type"]]
            text = a.get("value", "")
            if type_ == "Str" and text == "":
                text = "%"
            args.append(V.decode_value(type_, text if type_ != "Null" else "-"))
        prov = data.get("provenance", {"kind": "RandomSeed"})
        provenance = (("NegatedBranch", prov["parentId"], prov["branchIndex"])
                      if prov["kind"] == "NegatedBranch" else ("RandomSeed",))
        symbolic = data.get("symbolic")
        if symbolic is None:
            symbolic = [i for i, a in enumerate(args) if V.tag_of(a) == V.TAG_STR]
        return cls(int(data.get("id", 0)), tuple(args), tuple(symbolic), provenance,
                   int(data.get("generation", 0)), data.get("function", ""))


def dump_testcase(tc: TestCase) -> str:
    return json.dumps(tc.to_json(), indent=2, sort_keys=True) + "\n"


def load_testcase(text: str) -> TestCase:
    return TestCase.from_json(json.loads(text))


def random_string(rng: random.Random, alphabet: bytes, max_len: int) -> bytes:
    n = rng.randint(0, max_len)
    return bytes(rng.choice(alphabet) for _ in range(n))


def random_seeds(param_types, n: int, rng_seed: int, alphabet: bytes, max_len: int = 8,
                 symbolic: tuple[int, ...] | None = None, function: str = "") -> list[TestCase]:
    """``n`` random cases: String params get random strings, others null."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(rng_seed)
    if symbolic is None:
        symbolic = tuple(i for i, t in enumerate(param_types) if t == STRING)
    out = []
    for i in range(n):
        args = tuple(random_string(rng, alphabet, max_len) if t == STRING else None
                     for t in param_types)
        out.append(TestCase(i, args, symbolic, ("RandomSeed",), 0, function))
    return out

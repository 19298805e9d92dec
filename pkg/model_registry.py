"""Registry of model families and the parser for model-spec expressions.

Grammar::

    SPEC := NAME '(' [ARG (',' ARG)*] ')' | 'file:' PATH
    ARG  := SPEC | NUMBER

with NAME one of the registered families (bl, rt, complete, cycle, product).
"""
import logging
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from errors import ModelSpecError
from markov import MarkovTriple
from models import basic_chains, bernoulli_laplace, random_transposition
from models.file_chain import load_triple

logger = logging.getLogger(__name__)

MODEL_MODULES = [bernoulli_laplace, random_transposition, basic_chains]

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?")


def get_all_models() -> List[Dict[str, Any]]:
    """Get all registered model families with their constructors.

    Returns:
        List of dicts with name, description, parameters and function
    """
    all_models = []
    for module in MODEL_MODULES:
        for declaration in module.get_model_declarations():
            all_models.append((module, declaration))

    model_map = {}
    for module, declaration in all_models:
        model_def = declaration.get('model', {})
        name = model_def.get('name')
        constructor = model_def.get('constructor')
        if name and constructor and hasattr(module, constructor):
            model_map[name] = {
                'name': name,
                'description': model_def.get('description', ''),
                'parameters': model_def.get('parameters', {}),
                'function': getattr(module, constructor),
            }
        else:
            logger.warning("Skipping model declaration %r: constructor %r not found", name, constructor)
    return list(model_map.values())


@dataclass(frozen=True, eq=False)
class BuiltModel:
    """A parsed model: its normalised spec text, the triple and the family object (if any)."""
    spec: str
    triple: MarkovTriple
    model: Any = None


def convert_argument_types(arguments: Dict[str, Any], model_props: Dict[str, Any]) -> Dict[str, Any]:
    """Convert raw argument tokens to the types declared in the model schema.

    Raises:
        ModelSpecError: If a value does not fit its declared type
    """
    converted = {}
    for key, value in arguments.items():
        expected_type = model_props.get(key, {}).get('type', 'string')

        if expected_type == 'model':
            if not isinstance(value, BuiltModel):
                raise ModelSpecError(f"argument {key!r} must be a model expression, got {value!r}")
            converted[key] = value.triple
        elif isinstance(value, BuiltModel):
            raise ModelSpecError(f"argument {key!r} must be a {expected_type}, got a model")
        elif expected_type == 'integer':
            try:
                converted[key] = int(value)
            except ValueError:
                raise ModelSpecError(f"argument {key!r} must be an integer, got {value!r}")
        elif expected_type == 'number':
            try:
                converted[key] = float(value)
            except ValueError:
                raise ModelSpecError(f"argument {key!r} must be a number, got {value!r}")
        else:
            converted[key] = value

    return converted


class _Parser:
    def __init__(self, text: str, registry: Dict[str, Dict[str, Any]]):
        self.text = text
        self.pos = 0
        self.registry = registry

    def fail(self, message: str):
        raise ModelSpecError(f"{message} at position {self.pos} in {self.text!r}")

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str):
        if self.peek() != char:
            self.fail(f"expected {char!r}")
        self.pos += 1

    def parse(self) -> BuiltModel:
        built = self.expression()
        self.skip()
        if self.pos != len(self.text):
            self.fail(f"unexpected {self.text[self.pos:]!r}")
        return built

    def expression(self) -> BuiltModel:
        self.skip()
        if self.text.startswith('file:', self.pos):
            return self.file()
        match = _NAME.match(self.text, self.pos)
        if not match:
            self.fail("expected a model name")
        name = match.group(0)
        entry = self.registry.get(name)
        if entry is None:
            self.fail(f"unknown model {name!r} (known: {', '.join(sorted(self.registry))}, file:PATH)")
        self.pos = match.end()
        self.expect('(')
        raw = []
        if self.peek() != ')':
            raw.append(self.argument())
            while self.peek() == ',':
                self.pos += 1
                raw.append(self.argument())
        self.expect(')')
        return self.build(name, entry, raw)

    def file(self) -> BuiltModel:
        start = self.pos + len('file:')
        end = start
        while end < len(self.text) and self.text[end] not in ',)':
            end += 1
        path = self.text[start:end].strip()
        if not path:
            self.fail("empty file path")
        self.pos = end
        return BuiltModel(spec=f"file:{path}", triple=load_triple(path))

    def argument(self):
        self.skip()
        if self.text.startswith('file:', self.pos) or _NAME.match(self.text, self.pos):
            return self.expression()
        match = _NUMBER.match(self.text, self.pos)
        if not match:
            self.fail("expected a number or a model expression")
        self.pos = match.end()
        return match.group(0)

    def build(self, name: str, entry: Dict[str, Any], raw: list) -> BuiltModel:
        props = entry['parameters'].get('properties', {})
        names = list(props)
        if len(raw) != len(names):
            self.fail(f"{name} takes {len(names)} argument(s) ({', '.join(names)}), got {len(raw)}")
        arguments = convert_argument_types(dict(zip(names, raw)), props)
        result = entry['function'](**arguments)
        text_args = [a.spec if isinstance(a, BuiltModel) else str(arguments[k]) for k, a in zip(names, raw)]
        spec = f"{name}({','.join(text_args)})"
        logger.debug("Parsed %s", spec)
        if isinstance(result, MarkovTriple):
            return BuiltModel(spec=spec, triple=result)
        return BuiltModel(spec=spec, triple=result.triple, model=result)


def parse_model(spec: str, registry: Optional[List[Dict[str, Any]]] = None) -> BuiltModel:
    """Parse a model-spec expression and build the model.

    Args:
        spec: Text such as 'bl(4,2)', 'product(complete(2),complete(2))' or 'file:chain.txt'
        registry: Model entries (defaults to get_all_models())

    Raises:
        ModelSpecError: On syntax errors, unknown names or wrong argument types
        ModelParameterError: If a constructor rejects its parameters
    """
    if not isinstance(spec, str) or not spec.strip():
        raise ModelSpecError("empty model specification")
    entries = registry if registry is not None else get_all_models()
    return _Parser(spec.strip(), {entry['name']: entry for entry in entries}).parse()

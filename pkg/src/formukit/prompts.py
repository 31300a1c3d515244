"""Deterministic prompt construction and response parsing.

Five strategies are supported: zero-shot (ZS), zero-shot chain-of-thought
(ZS_CoT), few-shot (FS), few-shot chain-of-thought (FS_CoT) and
retrieval-augmented (RAG). All render the same seven-section structured
prompt (Role, Background, Request, Input Format, Output Format, Examples,
Constraints); few-shot/RAG fill the Examples section with worked
input/output blocks, and CoT variants append exactly one step-by-step
instruction line. Rendering is byte-deterministic: identical inputs give
identical text.

Section header spellings and the constraint block reproduce the structured
template this toolkit standardizes on, verbatim; the inverse-design template
prose is this toolkit's own.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateTimeError,
    DomainError,
    EmptyProfileError,
    ParseError,
    StrategyPreconditionError,
)
from .types import FEATURE_NAMES, DissolutionProfile, DrugSubstance, FormulationInput


class PromptStrategy(enum.Enum):
    ZS = "ZS"
    ZS_CoT = "ZS_CoT"
    FS = "FS"
    FS_CoT = "FS_CoT"
    RAG = "RAG"

    @property
    def is_cot(self) -> bool:
        return self in (PromptStrategy.ZS_CoT, PromptStrategy.FS_CoT)

    @property
    def needs_examples(self) -> bool:
        return self in (PromptStrategy.FS, PromptStrategy.FS_CoT, PromptStrategy.RAG)

    @property
    def base(self) -> "PromptStrategy":
        if self is PromptStrategy.ZS_CoT:
            return PromptStrategy.ZS
        if self is PromptStrategy.FS_CoT:
            return PromptStrategy.FS
        return self


#: CLI-facing spellings.
STRATEGY_ALIASES = {
    "zs": PromptStrategy.ZS,
    "zs-cot": PromptStrategy.ZS_CoT,
    "zs_cot": PromptStrategy.ZS_CoT,
    "fs": PromptStrategy.FS,
    "fs-cot": PromptStrategy.FS_CoT,
    "fs_cot": PromptStrategy.FS_CoT,
    "rag": PromptStrategy.RAG,
}

COT_INSTRUCTION = "Do the step-by-step analysis"

SECTION_HEADERS = (
    ("role", "Role"),
    ("background", "Background"),
    ("request", "Reqeust"),
    ("input_format", "Input Format"),
    ("output_format", "Outout Format"),
    ("examples", "Examples"),
    ("constraints", "Constrains"),
)

_ROLE_BODY = """\
Hi, You are an expert on the Drug development.
You can design the particle size distribution for customized dissolution profiles,
or predict the Drug Released (%) based on given physical proerties such as particle size distribution."""

_BACKGROUND_BODY = """\
You have a bunch of experience on that and
have studied those commonly used emperical diffusion models
such as Nernst-Brunner translation dissolution and radial diffusion dynamics from
(1) Salish, K., So, C., Jeong, S. H., Hou, H. H. & Mao, C. A Refined Thin-Film Model for Drug Dissolution
Considering Radial Diffusion - Simulating Powder Dissolution. Pharm Res 41, 947-958 (2024).
https://doi.org/10.1007/s11095-024-03696-0
(2) Djukaj, S., Kolar, J., Lehocky, R., Zadrazil, A. & Stepanek, F. Design of particle size distribution for
custom dissolution profiles by solving the inverse problem. Powder Technology: An International Journal
on the Science and Technology of Wet and Dry Particulate Systems, 395 (2022)."""

_FORWARD_REQUEST_BODY = """\
1. Your customer will give you several fundamental parameters and based on the given parameters,
2. you need to either predict the Drug Released (%) for the customer or
3. you need to design the physical properties of the drugs and optimize the conditions based on given
dissolution profile (dissolution rate)"""

_INVERSE_REQUEST_BODY = """\
1. Your customer will give you a target dissolution profile on a fixed time grid,
2. you need to design the physical properties of the drugs (particle size distribution and the
derived D50, specific surface area and volume-based equivalent particle size) whose dissolution
matches the target, and
3. optimize the conditions based on given dissolution profile (dissolution rate)"""

_OUTPUT_FORMAT_SAMPLE = """\
{
  "columns": ["Time (hr)", "Drug Released (%)"],
  "data": [
    [0, 0],
    [0.25, 85],
    [0.5, 87],
    [0.75, 88],
    [1, 89],
    [2, 89],
    [3, 89],
    [4, 88],
    [5, 87],
    [6, 87]
  ]
}"""

_FORWARD_OUTPUT_BODY = """\
please generate a table with columns: [Time(min), Drug Released (%)].
Include key metrics: {t_0}, {t_0.25}, {t_0.5}, {t_0.75}, {t_1}, {t_2}, {t_3}, {t_4}, {t_5},
{t_6}
where t refers to the abbreviation of "Time (hrs)"

""" + _OUTPUT_FORMAT_SAMPLE

_INVERSE_OUTPUT_BODY = """\
please generate a table with columns: [Property, Value] listing the designed physical properties:
"Mean Particle Size, D50", "Aspect ratio", "Roundness", "Specific surface area (m^2/g)",
"volume-based equivalent particle size (micrometer)", and the geometric standard deviation of the
designed particle size distribution."""

_CONSTRAINTS_BODY = """\
1. Nernst-Brunner equation = {

$$\\frac{dx}{dt} = -\\frac{k \\psi_A}{\\rho_s \\psi_v} (C_{\\text{sat}} - C_b)$$

Where  $k = \\frac{Sh}{D} \\cdot x$ ,
 $Sh = 2 + 0.52 Re^{0.52} Sc^{1/3}$
}
2. Final dissolution ≥85% within 60 min (USP compliance).
3. Please Do not make up recommendations without scientific basis.
4. Only provide optimizations that have clear scientific reasoning.
5. Do not make up the answer randomly if you may not be able to provide the correct answer."""

NO_EXAMPLES_TEXT = "no examples provided"

#: Verbatim record keys used inside prompt blocks, in render order.
VERBATIM_KEYS = (
    ("Mean Particle Size, D50", "d50_um"),
    ("Aspect ratio", "aspect_ratio"),
    ("Roundness", "roundness"),
    ("solubility of drug (mg/mL)", "solubility_mg_ml"),
    ("Diffusion coefficient of drug (m^2/s)", "diffusivity_m2_s"),
    ("True Density of drug (g/mL)", "true_density_g_ml"),
    ("Specific surface area (m^2/g)", "ssa_m2_g"),
    ("volume-based equivalent particle size (micrometer)", "vol_eq_um"),
)


def format_number(value: float) -> str:
    """Canonical numeric rendering for prompt blocks.

    Integral values drop the decimal point; values whose shortest repr is
    scientific render in the "7.5x 10^(-10)" style. Both forms parse back to
    the identical float (repr is the shortest round-tripping string).
    """
    f = float(value)
    if f == int(f) and abs(f) < 1e16:
        return str(int(f))
    s = repr(f)
    if "e" in s:
        mantissa_s, exp_s = s.split("e")
        return f"{mantissa_s}x 10^({int(exp_s)})"
    return s


_SCI_NOTATION_RE = re.compile(r"^([-+]?\d+(?:\.\d+)?)\s*x\s*10\^\((-?\d+)\)$")


def parse_number(text: str) -> float:
    """Inverse of :func:`format_number`; also accepts plain float syntax."""
    text = text.strip().rstrip(",")
    m = _SCI_NOTATION_RE.match(text)
    if m:
        return float(f"{m.group(1)}e{m.group(2)}")
    return float(text)


def render_input_block(features: FormulationInput) -> str:
    """The Input Format block with verbatim keys and canonical numbers."""
    lines = ["{", "  Input = {"]
    for verbatim, attr in VERBATIM_KEYS:
        sep = ": " if verbatim == "Roundness" else " : "
        lines.append(f'    "{verbatim}"{sep}{format_number(getattr(features, attr))},')
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines)


def render_profile_json(profile: DissolutionProfile, indent: str = "") -> str:
    """Profile as the columns/data JSON block used in prompts and responses."""
    rows = ",\n".join(
        f"{indent}    [{format_number(t)}, {format_number(v)}]"
        for t, v in profile.points()
    )
    return (f'{indent}{{\n{indent}  "columns": ["Time (hr)", "Drug Released (%)"],\n'
            f'{indent}  "data": [\n{rows}\n{indent}  ]\n{indent}}}')


def render_example_blocks(records) -> str:
    """Worked input/output example blocks, one per record, in given order."""
    records = list(records)
    if not records:
        raise StrategyPreconditionError("at least one example record is required")
    blocks = []
    for i, rec in enumerate(records, start=1):
        blocks.append(
            f"### Example{i}: ###\n"
            f"### Input : ###\n"
            f"{render_input_block(rec.features)}\n"
            f"### Outout: ###\n"
            f"{render_profile_json(rec.profile)}"
        )
    return "\n".join(blocks)


@dataclass(frozen=True)
class PromptBundle:
    """An assembled prompt: ordered sections plus the rendered text."""

    sections: tuple[tuple[str, str], ...]
    rendered: str
    strategy: PromptStrategy

    def section(self, name: str) -> str:
        for key, body in self.sections:
            if key == name:
                return body
        raise KeyError(name)


def _render(sections: dict[str, str], strategy: PromptStrategy) -> PromptBundle:
    ordered = tuple((key, sections[key]) for key, _ in SECTION_HEADERS)
    parts = [f"### {header}: ###\n{sections[key]}" for key, header in SECTION_HEADERS]
    rendered = "\n\n".join(parts)
    if strategy.is_cot:
        rendered += "\n" + COT_INSTRUCTION
    return PromptBundle(sections=ordered, rendered=rendered, strategy=strategy)


def _examples_body(strategy: PromptStrategy, examples) -> str:
    if strategy.needs_examples:
        if examples is None or (not isinstance(examples, str) and not list(examples)):
            raise StrategyPreconditionError(
                f"{strategy.value} requires at least one example record")
        return examples if isinstance(examples, str) else render_example_blocks(examples)
    return NO_EXAMPLES_TEXT


def build_prompt(strategy: PromptStrategy, features: FormulationInput,
                 examples=None, constraints: str | None = None) -> PromptBundle:
    """Assemble the forward (release-prediction) prompt.

    Parameters
    ----------
    examples : list of FormulationRecord, str, or None
        Required for FS/FS_CoT/RAG; rendered into the Examples section
        (a pre-rendered string is used as-is). ZS variants get the literal
        "no examples provided".
    constraints : str, optional
        Replaces the standard Constraints body (the kinetic model block and
        the USP rule) when given.
    """
    sections = {
        "role": _ROLE_BODY,
        "background": _BACKGROUND_BODY,
        "request": _FORWARD_REQUEST_BODY,
        "input_format": render_input_block(features),
        "output_format": _FORWARD_OUTPUT_BODY,
        "examples": _examples_body(strategy, examples),
        "constraints": constraints if constraints is not None else _CONSTRAINTS_BODY,
    }
    return _render(sections, strategy)


def build_inverse_prompt(strategy: PromptStrategy, target: DissolutionProfile,
                         drug: DrugSubstance, examples=None,
                         constraints: str | None = None) -> PromptBundle:
    """Assemble the inverse (property-design) prompt for a target profile."""
    if target.n_points < 2:
        raise StrategyPreconditionError("inverse prompt needs a target with >= 2 points")
    input_lines = ["{", "  Input = {"]
    for verbatim, value in (
        ("solubility of drug (mg/mL)", drug.c_sat_mg_ml),
        ("Diffusion coefficient of drug (m^2/s)", drug.diffusivity_m2_s),
        ("True Density of drug (g/mL)", drug.true_density_g_ml),
    ):
        input_lines.append(f'    "{verbatim}" : {format_number(value)},')
    input_lines.append('    "target dissolution profile" :')
    input_lines.append(render_profile_json(target, indent="    ") + ",")
    input_lines.append("  }")
    input_lines.append("}")
    sections = {
        "role": _ROLE_BODY,
        "background": _BACKGROUND_BODY,
        "request": _INVERSE_REQUEST_BODY,
        "input_format": "\n".join(input_lines),
        "output_format": _INVERSE_OUTPUT_BODY,
        "examples": _examples_body(strategy, examples),
        "constraints": constraints if constraints is not None else _CONSTRAINTS_BODY,
    }
    return _render(sections, strategy)


def extract_section(rendered: str, header: str) -> str:
    """Body of one "### Header: ###" section of a rendered prompt."""
    marker = f"### {header}: ###\n"
    start = rendered.find(marker)
    if start < 0:
        raise ParseError(f"prompt has no section {header!r}")
    body_start = start + len(marker)
    nxt = rendered.find("\n### ", body_start)
    return rendered[body_start:] if nxt < 0 else rendered[body_start:nxt]


def parse_input_block(text: str) -> FormulationInput:
    """Recover a FormulationInput from an Input Format block.

    Tolerates the "Input = {" wrapper, trailing commas and the
    "7.5x 10^(-10)" number style. Raises ParseError listing any missing keys.
    """
    values = {}
    for verbatim, attr in VERBATIM_KEYS:
        pattern = re.compile(
            re.escape(f'"{verbatim}"') + r"\s*:\s*([^,\n]+)")
        m = pattern.search(text)
        if m:
            try:
                values[attr] = parse_number(m.group(1))
            except ValueError as exc:
                raise ParseError(f"unreadable value for {verbatim!r}: {m.group(1)!r}") from exc
    missing = [name for name in FEATURE_NAMES if name not in values]
    if missing:
        raise ParseError(f"input block is missing fields: {', '.join(missing)}")
    return FormulationInput(**values)


@dataclass
class ParseReport:
    """Log of every leniency the response parser applied."""

    unit: str = "hr"
    converted_from_minutes: bool = False
    clamped_points: list[tuple[float, float]] = field(default_factory=list)  # (time, original)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "unit": self.unit,
            "converted_from_minutes": self.converted_from_minutes,
            "clamped_points": [[t, v] for t, v in self.clamped_points],
            "notes": list(self.notes),
        }


def _candidate_json_objects(text: str):
    """Balanced {...} substrings, decoded; yields (dict, start_index)."""
    depth = 0
    start = None
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0 and start is not None:
                    candidate = text[start:i + 1]
                    try:
                        obj = json.loads(candidate)
                    except json.JSONDecodeError:
                        # Re-scan the interior: a nested object may be valid
                        # JSON even when the outer block is not.
                        yield from _candidate_json_objects(candidate[1:-1])
                    else:
                        if isinstance(obj, dict):
                            yield obj, start
                    start = None
    return


def parse_profile_response(text: str, full_output: bool = False):
    """Extract the first columns/data profile table from response text.

    Tolerates surrounding prose and code fences, accepts "Time (min)" with
    conversion to hours, clamps out-of-range released values to [0, 100]
    (logged in the parse report) and returns points sorted by time.

    Parameters
    ----------
    full_output : bool
        When true, returns ``(profile, ParseReport)``.
    """
    report = ParseReport()
    table = None
    for obj, _ in _candidate_json_objects(text):
        if "columns" in obj and "data" in obj:
            table = obj
            break
    if table is None:
        raise ParseError("no JSON object with 'columns' and 'data' keys found")

    columns = table.get("columns") or []
    time_idx, value_idx = 0, 1
    for i, name in enumerate(columns):
        if isinstance(name, str) and "time" in name.lower():
            time_idx = i
            value_idx = 1 - i if len(columns) == 2 else (0 if i != 0 else 1)
            break
    time_name = columns[time_idx] if len(columns) > time_idx else ""
    minutes = isinstance(time_name, str) and "min" in time_name.lower()
    if minutes:
        report.unit = "min"
        report.converted_from_minutes = True
        report.notes.append("time column given in minutes; converted to hours")

    rows = table["data"]
    if not isinstance(rows, list) or len(rows) == 0:
        raise EmptyProfileError("profile table has an empty data array")

    times, released = [], []
    for row in rows:
        if not isinstance(row, (list, tuple)) or len(row) <= max(time_idx, value_idx):
            raise ParseError(f"malformed data row: {row!r}")
        try:
            t = float(row[time_idx])
            v = float(row[value_idx])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric data row: {row!r}") from exc
        if minutes:
            t = t / 60.0
        if v < 0.0 or v > 100.0:
            report.clamped_points.append((t, v))
            v = min(max(v, 0.0), 100.0)
        times.append(t)
        released.append(v)
    if report.clamped_points:
        report.notes.append(
            f"{len(report.clamped_points)} value(s) clamped into [0, 100]")

    try:
        profile = DissolutionProfile(np.asarray(times), np.asarray(released))
    except DuplicateTimeError:
        raise
    except DomainError as exc:
        raise ParseError(str(exc)) from exc
    return (profile, report) if full_output else profile


@dataclass(frozen=True)
class RuleViolation:
    rule: str
    severity: str        # "error" or "advisory"
    message: str


def validate_profile(profile: DissolutionProfile) -> list[RuleViolation]:
    """Rule findings for a parsed profile; empty list means fully compliant.

    Checks the (0, 0) start, the value range, the dissolution-rule target
    (>= 85% released at some point within 1 hr; advisory when missed) and
    flags drops of more than 5 percentage points between consecutive points.
    """
    findings: list[RuleViolation] = []
    if not profile.starts_at_zero:
        findings.append(RuleViolation(
            "initial-condition", "error",
            f"first point is ({profile.times_hr[0]:g}, {profile.released_pct[0]:g}), expected (0, 0)"))
    out_of_range = (profile.released_pct < 0) | (profile.released_pct > 100)
    if np.any(out_of_range):
        findings.append(RuleViolation(
            "range", "error", "released % outside [0, 100]"))
    within_hour = profile.times_hr <= 1.0
    if not np.any(profile.released_pct[within_hour] >= 85.0):
        findings.append(RuleViolation(
            "usp-dissolution-rule", "advisory",
            "no point with released >= 85% within 60 min"))
    drops = np.diff(profile.released_pct)
    for i in np.nonzero(drops < -5.0)[0]:
        findings.append(RuleViolation(
            "non-monotonic", "advisory",
            f"released drops {-drops[i]:.1f} pp between t={profile.times_hr[i]:g} "
            f"and t={profile.times_hr[i + 1]:g} hr"))
    return findings

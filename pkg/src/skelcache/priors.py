"""Class-specific descriptor weights sourced from an LLM.

Per class the model is asked, in one structured prompt, for spatial
importance scores over the body regions (summing to 1), temporal
importance scores over the motion phases (summing to 1), and a scalar
gamma in [0, 1] trading holistic against local recognition.  The raw
triple is assembled into the descriptor weight vector

    w_tilde = [gamma, (1-gamma)*spatial..., (1-gamma)*temporal...]

and l1-normalised; the denominator is analytically 2 - gamma, so the
global component of the final vector equals gamma / (2 - gamma).

Responses arrive either live over an HTTP chat-completion endpoint or
from a fixture directory holding one response file per class (named by
the slugified class name), which is what tests and CI use.  Sums within
1e-3 of 1 are silently renormalised; anything further off is an error.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

import requests

DEFAULT_SPATIAL_LABELS = ("Head", "Torso", "Arms", "Legs")
DEFAULT_TEMPORAL_LABELS = ("Beginning", "Middle", "End")

# LLM list sums may wobble below exact 1; beyond this we refuse to guess
SUM_TOLERANCE = 1e-3

_COUNT_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
}


class PriorError(ValueError):
    """Malformed LLM response, weight vector, or prior-matrix file."""


class PriorFetchError(RuntimeError):
    """One or more classes could not be resolved to a valid prior."""

    def __init__(self, failures: dict[str, str]):
        self.failures = dict(failures)
        lines = "; ".join(f"{name}: {reason}" for name, reason in self.failures.items())
        super().__init__(f"prior fetch failed for {len(self.failures)} class(es): {lines}")


def _renormalise(values, what: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr < 0):
        raise PriorError(f"{what} weights must be non-negative, got {list(values)}")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise PriorError(f"{what} weights must sum to 1 (+-{SUM_TOLERANCE}), got sum {total}")
    return tuple(float(x) for x in arr / total)


@dataclass
class RawPrior:
    """Validated spatial/temporal/gamma triple as returned by the LLM."""

    spatial: tuple[float, ...]
    temporal: tuple[float, ...]
    gamma: float

    def __post_init__(self):
        self.spatial = _renormalise(self.spatial, "spatial")
        self.temporal = _renormalise(self.temporal, "temporal")
        self.gamma = float(self.gamma)
        if not 0.0 <= self.gamma <= 1.0:
            raise PriorError(f"gamma must be in [0, 1], got {self.gamma}")

    def to_json(self) -> str:
        return json.dumps({"spatial": list(self.spatial), "temporal": list(self.temporal), "gamma": self.gamma})


def _count_word(n: int) -> str:
    return _COUNT_WORDS.get(n, str(n))


def _weight_token(label: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")
    return f"w_{slug or 'x'}"


def build_prompt(action_name: str, spatial_labels=DEFAULT_SPATIAL_LABELS,
                 temporal_labels=DEFAULT_TEMPORAL_LABELS) -> str:
    """Render the single per-class prompt; deterministic in its inputs."""
    if not action_name or not str(action_name).strip():
        raise PriorError("action name must be non-empty")
    if not spatial_labels or not temporal_labels:
        raise PriorError("spatial and temporal label lists must be non-empty")
    action = str(action_name).strip()
    p, z = len(spatial_labels), len(temporal_labels)
    spatial_list = ", ".join(spatial_labels)
    temporal_list = ", ".join(temporal_labels)
    spatial_fmt = ", ".join(_weight_token(lb) for lb in spatial_labels)
    temporal_fmt = ", ".join(_weight_token(lb) for lb in temporal_labels)
    return (
        "You are an expert in human-action understanding.\n"
        f'Given the action class "{action}", answer the following three questions '
        "without adding commentary.\n"
        "\n"
        "1. Spatial importance.\n"
        f"   The human body is divided into {_count_word(p)} regions:\n"
        f"   [{spatial_list}].\n"
        f"   Provide a list of {_count_word(p)} non-negative numbers that sum to 1, "
        f'corresponding to the relative importance of each region for recognising "{action}".\n'
        f'   Format: "spatial": [{spatial_fmt}]\n'
        "\n"
        "2. Temporal importance.\n"
        f"   The action sequence is divided into {_count_word(z)} phases:\n"
        f"   [{temporal_list}].\n"
        f"   Provide a list of {_count_word(z)} non-negative numbers that sum to 1, "
        "indicating the relative importance of each phase.\n"
        f'   Format: "temporal": [{temporal_fmt}]\n'
        "\n"
        "3. Global vs local preference.\n"
        "   Provide a single number gamma in [0, 1] indicating how much the action "
        "should be recognised holistically (gamma ~ 1) versus by local parts/phases "
        "(gamma ~ 0).\n"
        '   Format: "gamma": gamma\n'
        "\n"
        'Return one compact JSON object with keys "spatial", "temporal", and "gamma".\n'
        "Do not include any other keys, text, or explanations.\n"
    )


def _extract_json_object(text: str) -> dict:
    """Pull the first balanced JSON object out of possibly chatty text."""
    try:
        doc = json.loads(text)
        if isinstance(doc, dict):
            return doc
    except json.JSONDecodeError:
        pass
    start = text.find("{")
    while start != -1:
        depth = 0
        for i in range(start, len(text)):
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        doc = json.loads(text[start:i + 1])
                        if isinstance(doc, dict):
                            return doc
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    raise PriorError("response contains no JSON object")


def parse_response(text: str, spatial_count: int = 4, temporal_count: int = 3) -> RawPrior:
    """Parse one LLM response into a RawPrior.

    Extra keys are ignored; missing keys, wrong arities, negative weights,
    out-of-range gamma and off-by-more-than-1e-3 sums are errors.
    """
    doc = _extract_json_object(text)
    missing = [k for k in ("spatial", "temporal", "gamma") if k not in doc]
    if missing:
        raise PriorError(f"response missing key(s): {', '.join(missing)}")
    spatial, temporal, gamma = doc["spatial"], doc["temporal"], doc["gamma"]
    if not isinstance(spatial, list) or len(spatial) != spatial_count:
        raise PriorError(f"'spatial' must be a list of {spatial_count} numbers, got {spatial!r}")
    if not isinstance(temporal, list) or len(temporal) != temporal_count:
        raise PriorError(f"'temporal' must be a list of {temporal_count} numbers, got {temporal!r}")
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in spatial + temporal):
        raise PriorError("spatial/temporal entries must be numbers")
    if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
        raise PriorError(f"'gamma' must be a number, got {gamma!r}")
    return RawPrior(tuple(spatial), tuple(temporal), float(gamma))


def assemble_weights(raw: RawPrior) -> np.ndarray:
    """Build the l1-normalised descriptor weight vector from *raw*.

    Layout matches descriptor row order: [global, spatial..., temporal...].
    """
    g = raw.gamma
    w_tilde = np.concatenate((
        [g],
        (1.0 - g) * np.asarray(raw.spatial, dtype=np.float64),
        (1.0 - g) * np.asarray(raw.temporal, dtype=np.float64),
    ))
    return w_tilde / w_tilde.sum()  # sum is 2 - gamma, >= 1


def uniform_row(descriptor_count: int) -> np.ndarray:
    """Uniform fallback weights; the row sums to exactly 1.0."""
    if descriptor_count < 1:
        raise PriorError("descriptor_count must be >= 1")
    row = np.full(descriptor_count, 1.0 / descriptor_count, dtype=np.float64)
    row[-1] = 1.0 - float(row[:-1].sum())
    return row


def random_weight_matrix(class_count: int, descriptor_count: int, seed: int) -> np.ndarray:
    """Seeded non-negative rows, l1-normalised; fixed per class per seed."""
    rng = np.random.default_rng(seed)
    w = rng.random((class_count, descriptor_count))
    return w / w.sum(axis=1, keepdims=True)


@dataclass
class PriorMatrix:
    """Per-class descriptor weights, row-aligned with a class vocabulary."""

    class_names: list[str]
    spatial_count: int
    temporal_count: int
    weights: np.ndarray  # (class_count, spatial_count + temporal_count + 1)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.validate()

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def descriptor_count(self) -> int:
        return self.spatial_count + self.temporal_count + 1

    def validate(self) -> None:
        if self.class_count < 1:
            raise PriorError("prior matrix needs at least one class")
        if self.weights.shape != (self.class_count, self.descriptor_count):
            raise PriorError(
                f"weights shape {self.weights.shape} != ({self.class_count}, {self.descriptor_count})"
            )
        if not np.isfinite(self.weights).all():
            raise PriorError("weights contain NaN/Inf")
        if np.any(self.weights < 0):
            raise PriorError("weights must be non-negative")
        sums = self.weights.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-9)[0]
        if bad.size:
            raise PriorError(f"row(s) {bad.tolist()} are not l1-normalised (sums {sums[bad].tolist()})")

    def row(self, class_index: int) -> np.ndarray:
        return self.weights[class_index]


def save_priors(path, matrix: PriorMatrix) -> None:
    matrix.validate()
    doc = {
        "class_names": matrix.class_names,
        "P": matrix.spatial_count,
        "Z": matrix.temporal_count,
        "weights": [[float(x) for x in row] for row in matrix.weights],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_priors(path) -> PriorMatrix:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PriorError(f"prior matrix is not valid JSON: {exc}") from exc
    missing = [k for k in ("class_names", "P", "Z", "weights") if k not in doc]
    if missing:
        raise PriorError(f"prior matrix missing key(s): {', '.join(missing)}")
    if len(doc["weights"]) != len(doc["class_names"]):
        raise PriorError(
            f"{len(doc['weights'])} weight rows for {len(doc['class_names'])} class names"
        )
    width = doc["P"] + doc["Z"] + 1
    for i, row in enumerate(doc["weights"]):
        if len(row) != width:
            raise PriorError(f"row {i} has {len(row)} entries, expected {width}")
    return PriorMatrix(doc["class_names"], doc["P"], doc["Z"], np.asarray(doc["weights"], dtype=np.float64))


def class_slug(name: str) -> str:
    """Filesystem-safe fixture name for a class ('put on hat/cap' -> 'put_on_hat_cap')."""
    slug = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    if not slug:
        raise PriorError(f"class name {name!r} has no slug-safe characters")
    return slug


@dataclass
class EndpointConfig:
    """Where and how to reach the chat-completion service.

    With fixture_dir set no network is touched: the response for class
    'Waving' is read from <fixture_dir>/waving.json instead.
    """

    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4-turbo"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 1.0
    fixture_dir: str | None = None


def _post_chat(prompt: str, cfg: EndpointConfig) -> str:
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    payload = {
        "model": cfg.model,
        "temperature": 0,
        "messages": [{"role": "user", "content": prompt}],
    }
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    last_error: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=cfg.timeout_s)
            if resp.status_code >= 500:
                raise requests.HTTPError(f"server error {resp.status_code}")
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except requests.HTTPError as exc:
            status = getattr(getattr(exc, "response", None), "status_code", None)
            if status is not None and 400 <= status < 500:
                raise  # client errors do not retry
            last_error = exc
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            last_error = exc
        if attempt < cfg.max_retries:
            time.sleep(cfg.backoff_s * (2 ** attempt))
    raise requests.RequestException(f"chat endpoint failed after {cfg.max_retries + 1} attempts: {last_error}")


def fetch_priors(class_names, endpoint: EndpointConfig,
                 spatial_labels=DEFAULT_SPATIAL_LABELS,
                 temporal_labels=DEFAULT_TEMPORAL_LABELS,
                 save_to=None) -> PriorMatrix:
    """Resolve one prior per class and stack them into a PriorMatrix.

    Live mode issues one chat-completion request per class (temperature 0,
    bounded retries with exponential backoff).  Fixture mode reads
    <fixture_dir>/<slug>.json per class.  Failures are collected per class
    and raised together as PriorFetchError.
    """
    class_names = list(class_names)
    if not class_names:
        raise PriorError("class list is empty")
    p, z = len(spatial_labels), len(temporal_labels)
    rows = []
    failures: dict[str, str] = {}
    for name in class_names:
        try:
            if endpoint.fixture_dir is not None:
                fixture = os.path.join(endpoint.fixture_dir, class_slug(name) + ".json")
                if not os.path.exists(fixture):
                    raise PriorError(f"fixture file not found: {fixture}")
                with open(fixture, encoding="utf-8") as fh:
                    text = fh.read()
            else:
                text = _post_chat(build_prompt(name, spatial_labels, temporal_labels), endpoint)
            rows.append(assemble_weights(parse_response(text, p, z)))
        except Exception as exc:  # collected and re-raised together
            failures[name] = str(exc)
            rows.append(None)
    if failures:
        raise PriorFetchError(failures)
    matrix = PriorMatrix(class_names, p, z, np.stack(rows))
    if save_to is not None:
        save_priors(save_to, matrix)
    return matrix

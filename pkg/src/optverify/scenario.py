"""Canonical data model for retail scenario instances.

A scenario instance describes one multi-period perishable-inventory problem:
dimensions (periods, products, locations), demand, capacities, costs, and the
substitution/transshipment network.  Instances are validated once and are
immutable afterwards, so they can be shared freely across pipeline workers.

Two conventions matter everywhere downstream:

* Periods are 1-indexed in the model (``t = 1..T``) but stored 0-indexed in
  arrays; :func:`demand_at` owns the conversion.
* Optional side constraints use an explicit tri-state: an active numeric
  value, or ``None`` for "inactive".  A waste cap of ``0.0`` and "no waste
  cap" mean different things.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import SchemaError

SHARE_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Costs:
    purchasing: dict[str, float]
    inventory: dict[str, float]
    waste: dict[str, float]
    lost_sales: dict[str, float]
    fixed_order: float
    transshipment: float


@dataclass(frozen=True)
class SideConstraints:
    moq: float = 0.0
    pack_size: int = 1
    budget_per_period: float | None = None
    waste_limit_pct: float | None = None


@dataclass(frozen=True)
class Network:
    sub_edges: tuple[tuple[str, str], ...] = ()
    trans_edges: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ScenarioInstance:
    name: str
    description: str
    periods: int
    products: tuple[str, ...]
    locations: tuple[str, ...]
    shelf_life: dict[str, int]
    lead_time: dict[str, int]
    demand_curve: dict[str, tuple[float, ...]]
    demand_share: dict[str, float]
    production_cap: dict[str, tuple[float, ...]]
    cold_capacity: dict[str, float]
    cold_usage: dict[str, float]
    labor_cap: dict[str, tuple[float, ...]]
    labor_usage: dict[str, float]
    return_rate: dict[str, float]
    costs: Costs
    constraints: SideConstraints = field(default_factory=SideConstraints)
    network: Network = field(default_factory=Network)


def _require(raw: Mapping[str, Any], key: str) -> Any:
    if key not in raw or raw[key] is None:
        raise SchemaError(f"{key}: missing required field")
    return raw[key]


def _as_number(value: Any, field_name: str) -> float:
    # Returns the value unchanged (int stays int) so serialization
    # round-trips byte-exactly; callers only rely on numeric semantics.
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{field_name}: expected a number, got {value!r}")
    return value


def _id_list(raw: Mapping[str, Any], key: str) -> tuple[str, ...]:
    value = _require(raw, key)
    if not isinstance(value, (list, tuple)) or not value:
        raise SchemaError(f"{key}: expected a non-empty list of identifiers")
    ids = tuple(str(v) for v in value)
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{key}: identifiers must be unique")
    return ids


def _per_key_map(
    raw: Mapping[str, Any],
    key: str,
    keys: Iterable[str],
    *,
    arity: int | None = None,
    minimum: float | None = None,
    maximum: float | None = None,
    integral: bool = False,
    label: str | None = None,
) -> dict[str, Any]:
    """Validate a {product-or-location: value} map.

    ``arity`` turns the values into fixed-length numeric arrays; otherwise the
    values are scalars.  Bounds are inclusive (``maximum`` exclusive only via
    caller checks).  ``label`` overrides the field name used in errors (for
    nested records).
    """
    if key not in raw or raw[key] is None:
        raise SchemaError(f"{label or key}: missing required field")
    value = raw[key]
    key = label or key
    if not isinstance(value, Mapping):
        raise SchemaError(f"{key}: expected a mapping")
    out: dict[str, Any] = {}
    for k in keys:
        if k not in value:
            raise SchemaError(f"{key}: missing entry for {k!r}")
        entry = value[k]
        if arity is not None:
            if not isinstance(entry, (list, tuple)):
                raise SchemaError(f"{key}[{k}]: expected an array")
            if len(entry) != arity:
                raise SchemaError(
                    f"{key}[{k}]: expected {arity} entries, got {len(entry)}"
                )
            nums = tuple(_as_number(v, f"{key}[{k}]") for v in entry)
            for v in nums:
                if minimum is not None and v < minimum:
                    raise SchemaError(f"{key}[{k}]: value {v} below {minimum}")
            out[k] = nums
        else:
            num = _as_number(entry, f"{key}[{k}]")
            if integral and num != int(num):
                raise SchemaError(f"{key}[{k}]: expected an integer, got {num}")
            if minimum is not None and num < minimum:
                raise SchemaError(f"{key}[{k}]: value {num} below {minimum}")
            if maximum is not None and num > maximum:
                raise SchemaError(f"{key}[{k}]: value {num} above {maximum}")
            out[k] = int(num) if integral else num
    return out


def _edges(block: Any, key: str, valid_ids: tuple[str, ...]) -> tuple[tuple[str, str], ...]:
    if block is None:
        return ()
    if not isinstance(block, (list, tuple)):
        raise SchemaError(f"{key}: expected a list of [from, to] pairs")
    id_set = set(valid_ids)
    edges: list[tuple[str, str]] = []
    for i, pair in enumerate(block):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise SchemaError(f"{key}[{i}]: expected a [from, to] pair")
        a, b = str(pair[0]), str(pair[1])
        if a not in id_set or b not in id_set:
            raise SchemaError(f"{key}[{i}]: edge [{a}, {b}] references an undeclared id")
        if a == b:
            raise SchemaError(f"{key}[{i}]: self-loop [{a}, {b}] not allowed")
        edges.append((a, b))
    return tuple(edges)


def validate_instance(raw: Mapping[str, Any]) -> ScenarioInstance:
    """Validate a raw instance record and return the immutable instance.

    Raises :class:`SchemaError` naming the first offending field.  Absent
    optional side constraints (budget, waste cap) normalize to ``None``;
    an absent ``network`` block normalizes to empty edge lists.
    """
    if not isinstance(raw, Mapping):
        raise SchemaError("instance: expected a mapping at top level")

    name = str(_require(raw, "name"))
    description = str(raw.get("description", ""))

    periods = _require(raw, "periods")
    if not isinstance(periods, int) or isinstance(periods, bool) or periods < 1:
        raise SchemaError(f"periods: expected a positive integer, got {periods!r}")

    products = _id_list(raw, "products")
    locations = _id_list(raw, "locations")

    shelf_life = _per_key_map(raw, "shelf_life", products, minimum=1, integral=True)
    lead_time = _per_key_map(raw, "lead_time", products, minimum=0, integral=True)
    demand_curve = _per_key_map(raw, "demand_curve", products, arity=periods, minimum=0)
    demand_share = _per_key_map(raw, "demand_share", locations, minimum=0.0, maximum=1.0)
    share_sum = sum(demand_share.values())
    if abs(share_sum - 1.0) > SHARE_SUM_TOLERANCE:
        raise SchemaError(f"demand_share: shares sum to {share_sum!r}, expected 1.0")

    production_cap = _per_key_map(raw, "production_cap", products, arity=periods, minimum=0)
    cold_capacity = _per_key_map(raw, "cold_capacity", locations, minimum=0.0)
    cold_usage = _per_key_map(raw, "cold_usage", products, minimum=0.0)
    labor_cap = _per_key_map(raw, "labor_cap", locations, arity=periods, minimum=0)
    labor_usage = _per_key_map(raw, "labor_usage", products, minimum=0.0)
    return_rate = _per_key_map(raw, "return_rate", products, minimum=0.0)
    for p, rho in return_rate.items():
        if rho >= 1.0:
            raise SchemaError(f"return_rate[{p}]: value {rho} must be below 1.0")

    costs_raw = _require(raw, "costs")
    if not isinstance(costs_raw, Mapping):
        raise SchemaError("costs: expected a mapping")
    costs = Costs(
        purchasing=_per_key_map(costs_raw, "purchasing", products,
                                minimum=0.0, label="costs.purchasing"),
        inventory=_per_key_map(costs_raw, "inventory", products,
                               minimum=0.0, label="costs.inventory"),
        waste=_per_key_map(costs_raw, "waste", products,
                           minimum=0.0, label="costs.waste"),
        lost_sales=_per_key_map(costs_raw, "lost_sales", products,
                                minimum=0.0, label="costs.lost_sales"),
        fixed_order=_nonneg_scalar(costs_raw, "costs.fixed_order", "fixed_order"),
        transshipment=_nonneg_scalar(costs_raw, "costs.transshipment", "transshipment"),
    )

    cons_raw = raw.get("constraints") or {}
    if not isinstance(cons_raw, Mapping):
        raise SchemaError("constraints: expected a mapping")
    moq = _as_number(cons_raw.get("moq", 0), "constraints.moq")
    if moq < 0:
        raise SchemaError(f"constraints.moq: value {moq} below 0")
    pack = cons_raw.get("pack_size", 1)
    pack_num = _as_number(pack, "constraints.pack_size")
    if pack_num != int(pack_num) or pack_num < 1:
        raise SchemaError(f"constraints.pack_size: expected an integer >= 1, got {pack!r}")
    budget = cons_raw.get("budget_per_period")
    if budget is not None:
        budget = _as_number(budget, "constraints.budget_per_period")
    waste_pct = cons_raw.get("waste_limit_pct")
    if waste_pct is not None:
        waste_pct = _as_number(waste_pct, "constraints.waste_limit_pct")
        if waste_pct < 0:
            raise SchemaError(f"constraints.waste_limit_pct: value {waste_pct} below 0")
    constraints = SideConstraints(
        moq=moq, pack_size=int(pack_num),
        budget_per_period=budget, waste_limit_pct=waste_pct,
    )

    net_raw = raw.get("network") or {}
    if not isinstance(net_raw, Mapping):
        raise SchemaError("network: expected a mapping")
    network = Network(
        sub_edges=_edges(net_raw.get("sub_edges"), "network.sub_edges", products),
        trans_edges=_edges(net_raw.get("trans_edges"), "network.trans_edges", locations),
    )

    return ScenarioInstance(
        name=name,
        description=description,
        periods=periods,
        products=products,
        locations=locations,
        shelf_life=shelf_life,
        lead_time=lead_time,
        demand_curve=demand_curve,
        demand_share=demand_share,
        production_cap=production_cap,
        cold_capacity=cold_capacity,
        cold_usage=cold_usage,
        labor_cap=labor_cap,
        labor_usage=labor_usage,
        return_rate=return_rate,
        costs=costs,
        constraints=constraints,
        network=network,
    )


def _nonneg_scalar(raw: Mapping[str, Any], label: str, key: str) -> float:
    if key not in raw:
        raise SchemaError(f"{label}: missing required field")
    value = _as_number(raw[key], label)
    if value < 0:
        raise SchemaError(f"{label}: value {value} below 0")
    return value


def demand_at(inst: ScenarioInstance, product: str, location: str, t: int) -> float:
    """Model demand for (product, location) in 1-indexed period ``t``.

    ``demand_curve`` arrays are 0-indexed; the model period ``t`` reads index
    ``t - 1``, scaled by the location's demand share.
    """
    if not 1 <= t <= inst.periods:
        raise IndexError(f"period {t} outside 1..{inst.periods}")
    return inst.demand_curve[product][t - 1] * inst.demand_share[location]


def substitution_neighbors(inst: ScenarioInstance, product: str) -> tuple[set[str], set[str]]:
    """Return ``(n_out, n_in)`` for the product.

    An edge ``(p_from, p_to)`` is upward substitution: ``p_from``'s demand can
    be served by ``p_to``'s inventory.  ``n_out(p)`` holds products whose
    inventory can serve ``p``'s demand; ``n_in(p)`` holds products whose
    demand ``p``'s inventory serves.
    """
    n_out = {b for a, b in inst.network.sub_edges if a == product}
    n_in = {a for a, b in inst.network.sub_edges if b == product}
    return n_out, n_in


def to_json_dict(inst: ScenarioInstance) -> dict[str, Any]:
    """Canonical JSON-compatible representation (stable key order)."""
    return {
        "name": inst.name,
        "description": inst.description,
        "periods": inst.periods,
        "products": list(inst.products),
        "locations": list(inst.locations),
        "shelf_life": dict(inst.shelf_life),
        "lead_time": dict(inst.lead_time),
        "demand_curve": {p: list(v) for p, v in inst.demand_curve.items()},
        "demand_share": dict(inst.demand_share),
        "production_cap": {p: list(v) for p, v in inst.production_cap.items()},
        "cold_capacity": dict(inst.cold_capacity),
        "cold_usage": dict(inst.cold_usage),
        "labor_cap": {l: list(v) for l, v in inst.labor_cap.items()},
        "labor_usage": dict(inst.labor_usage),
        "return_rate": dict(inst.return_rate),
        "costs": {
            "purchasing": dict(inst.costs.purchasing),
            "inventory": dict(inst.costs.inventory),
            "waste": dict(inst.costs.waste),
            "lost_sales": dict(inst.costs.lost_sales),
            "fixed_order": inst.costs.fixed_order,
            "transshipment": inst.costs.transshipment,
        },
        "constraints": {
            "moq": inst.constraints.moq,
            "pack_size": inst.constraints.pack_size,
            "budget_per_period": inst.constraints.budget_per_period,
            "waste_limit_pct": inst.constraints.waste_limit_pct,
        },
        "network": {
            "sub_edges": [list(e) for e in inst.network.sub_edges],
            "trans_edges": [list(e) for e in inst.network.trans_edges],
        },
    }


def dumps_instance(inst: ScenarioInstance) -> str:
    """Serialize to the on-disk instance format (UTF-8 JSON, 2-space indent)."""
    return json.dumps(to_json_dict(inst), indent=2, ensure_ascii=False) + "\n"

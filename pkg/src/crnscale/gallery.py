"""Built-in example models shipped as data files."""

from __future__ import annotations

from importlib import resources

from .core import Network
from .parse import parse_network, parse_scaling
from .scaling import ScalingSpec

FILES = (
    "goutsias.crn",
    "goutsias_table1.scale",
    "goutsias_table3.scale",
    "michaelis_menten.crn",
    "michaelis_menten.scale",
    "mastny.crn",
    "mastny.scale",
    "network36.crn",
    "network36.scale",
    "birth_exchange.crn",
    "birth_exchange.scale",
    "chain4.crn",
    "chain4.scale",
)


def read_text(name: str) -> str:
    return resources.files("crnscale").joinpath("data", name).read_text(encoding="utf-8")


def network(name: str) -> Network:
    return parse_network(read_text(f"{name}.crn"))


def scaling(network_name: str, scale_name: str | None = None) -> ScalingSpec:
    net = network(network_name)
    return parse_scaling(read_text(f"{scale_name or network_name}.scale"), net)


def goutsias() -> Network:
    return network("goutsias")


def goutsias_table1() -> ScalingSpec:
    return scaling("goutsias", "goutsias_table1")


def goutsias_table3() -> ScalingSpec:
    return scaling("goutsias", "goutsias_table3")

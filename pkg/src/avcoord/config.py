"""The six coordination configurations and their capability flags."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ParameterError


class ConfigLabel(str, Enum):
    NO_OBSTACLE = "NoObstacle"
    OBSTACLE_NO_REROUTE = "ObstacleNoReroute"
    COMM_ONLY = "CommOnly"
    REROUTE_NO_OMM = "RerouteNoOMM"
    OMM_ONLY = "OMMOnly"
    REROUTE_OMM = "RerouteOMM"

    @property
    def number(self) -> int:
        return _NUMBERS[self]


_NUMBERS = {
    ConfigLabel.NO_OBSTACLE: 1,
    ConfigLabel.OBSTACLE_NO_REROUTE: 2,
    ConfigLabel.COMM_ONLY: 3,
    ConfigLabel.REROUTE_NO_OMM: 4,
    ConfigLabel.OMM_ONLY: 5,
    ConfigLabel.REROUTE_OMM: 6,
}

# (obstacles, communication, reactive reroute, omm)
_FLAGS = {
    ConfigLabel.NO_OBSTACLE: (False, False, False, False),
    ConfigLabel.OBSTACLE_NO_REROUTE: (True, False, False, False),
    ConfigLabel.COMM_ONLY: (True, True, False, False),
    ConfigLabel.REROUTE_NO_OMM: (True, True, True, False),
    ConfigLabel.OMM_ONLY: (True, True, False, True),
    ConfigLabel.REROUTE_OMM: (True, True, True, True),
}


@dataclass(frozen=True)
class CoordinationConfig:
    obstacles_enabled: bool
    communication: bool
    reactive_reroute: bool
    omm: bool
    label: ConfigLabel

    def __post_init__(self):
        if not isinstance(self.label, ConfigLabel):
            object.__setattr__(self, "label", ConfigLabel(self.label))
        expected = _FLAGS[self.label]
        flags = (self.obstacles_enabled, self.communication, self.reactive_reroute, self.omm)
        # Config 1 leaves the remaining flags unspecified; only obstacles matter.
        if self.label is ConfigLabel.NO_OBSTACLE:
            if self.obstacles_enabled:
                raise ParameterError("NoObstacle configuration cannot enable obstacles")
        elif flags != expected:
            raise ParameterError(f"flags {flags} do not match configuration {self.label.value}")
        if (self.reactive_reroute or self.omm) and not self.communication:
            raise ParameterError("rerouting or OMM without communication is not a tested configuration")

    @property
    def number(self) -> int:
        return self.label.number

    @classmethod
    def from_label(cls, label: ConfigLabel | str) -> "CoordinationConfig":
        label = ConfigLabel(label)
        return cls(*_FLAGS[label], label=label)

    @classmethod
    def from_number(cls, number: int) -> "CoordinationConfig":
        for label, n in _NUMBERS.items():
            if n == number:
                return cls.from_label(label)
        raise ParameterError(f"configuration number must be 1..6, got {number}")


ALL_CONFIGS = tuple(CoordinationConfig.from_number(i) for i in range(1, 7))

"""Class space: the ordered label vocabulary shared by datasets, models, and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ClassSpace:
    """Ordered class names with a reserved ignore label.

    Class ids are the positions 0..C-1; ``ignore_index`` marks pixels excluded
    from every loss and metric and must lie outside that range.
    """

    names: tuple[str, ...]
    ignore_index: int = 255

    def __post_init__(self):
        if not self.names:
            raise ValueError("class space needs at least one class")
        if any(not n for n in self.names):
            raise ValueError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        if 0 <= self.ignore_index < len(self.names):
            raise ValueError(
                f"ignore_index {self.ignore_index} collides with class ids 0..{len(self.names) - 1}"
            )
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {"class_names": list(self.names), "ignore_index": self.ignore_index}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSpace":
        return cls(names=tuple(d["class_names"]), ignore_index=int(d["ignore_index"]))


def toy_class_space(num_classes: int = 6) -> ClassSpace:
    """Default class space of the procedural benchmark."""
    base = ("backdrop", "disc", "box", "wedge", "band", "cross")
    if num_classes <= len(base):
        names = base[:num_classes]
    else:
        names = base + tuple(f"extra{i}" for i in range(num_classes - len(base)))
    return ClassSpace(names=names, ignore_index=255)

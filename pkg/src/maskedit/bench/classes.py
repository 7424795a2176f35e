"""Bundled object classes and scene compatibility groups.

Stands in for an external class-selection service: each themed group pairs a
background (short name for layer captions, detail phrase for the global
caption) with objects that plausibly share a scene. Selection is seeded, so
suites are reproducible offline.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SceneGroup:
    name: str
    background: str
    background_detail: str
    objects: tuple[str, ...]


SCENE_GROUPS: tuple[SceneGroup, ...] = (
    SceneGroup(
        name="savanna",
        background="a savanna",
        background_detail="a sunlit savanna with scattered acacia trees",
        objects=("a lion", "a tiger", "an elephant", "a zebra", "a giraffe", "an ostrich"),
    ),
    SceneGroup(
        name="kitchen table",
        background="a wooden table",
        background_detail="a rustic wooden table by a kitchen window",
        objects=("a cupcake", "a mug", "a dish", "a teapot", "a baguette", "a jam jar"),
    ),
    SceneGroup(
        name="beach",
        background="a beach",
        background_detail="a wide sandy beach under a clear sky",
        objects=("a sailboat", "a beach ball", "a surfboard", "a deck chair", "a kite", "a crab"),
    ),
    SceneGroup(
        name="city street",
        background="a city street",
        background_detail="a busy city street at dusk with neon signs",
        objects=("a bus", "a taxi", "a bicycle", "a hot dog cart", "a mailbox", "a scooter"),
    ),
    SceneGroup(
        name="study",
        background="a desk",
        background_detail="a tidy study desk lit by a warm lamp",
        objects=("a laptop", "a globe", "a stack of books", "a lamp", "a camera", "a clock"),
    ),
    SceneGroup(
        name="meadow",
        background="a meadow",
        background_detail="a green meadow dotted with wildflowers",
        objects=("a sheep", "a fox", "a picnic basket", "a fence", "a beehive", "a rabbit"),
    ),
)


def pick_group(rng) -> SceneGroup:
    return SCENE_GROUPS[int(rng.integers(0, len(SCENE_GROUPS)))]


def pick_objects(group: SceneGroup, count: int, rng) -> list[str]:
    """Reference class first, then compatible companions, all distinct."""
    if count > len(group.objects):
        raise ValueError(
            f"group {group.name!r} has {len(group.objects)} classes, need {count}"
        )
    order = rng.permutation(len(group.objects))
    return [group.objects[int(i)] for i in order[:count]]

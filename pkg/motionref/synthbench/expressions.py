"""
Template referring expressions and their inverse parser.

Templates:
    motion:     The {name}[ appears from the {entry},] moves {direction} to the {end}[, and disappears]
                The {name}[ appears from the {entry},] staying in the {end}[, and disappears]
    spatial:    The {name} in the {start}
    appearance: The {name}

{name} is "{color} {shape}", or "object" in the no_name variant. The
no_location variant drops every "from the ..", "to the .." and "in the .."
phrase.
"""

import re
import enum
from dataclasses import dataclass
from typing import Optional

from ..core.types import ExpressionStyle
from .motion import Direction, MotionDescriptor, Side
from .shapes import ShapeSpec

__all__ = ["ExpressionVariant", "ParsedExpression", "ExpressionParseError", "AmbiguousExpressionError",
           "render_expression", "parse_expression", "restyle_expression", "GENERIC_NAME"]

GENERIC_NAME = "object"


class ExpressionVariant(str, enum.Enum):
    ORIGIN = "origin"
    NO_LOCATION = "no_location"
    NO_NAME = "no_name"


class ExpressionParseError(ValueError):
    pass


class AmbiguousExpressionError(ValueError):
    """
    An expression would refer to more than one object.
    """


@dataclass(frozen=True)
class ParsedExpression:
    """
    Fields recovered from a template expression. Fields the expression does
    not mention are None.
    """
    style: ExpressionStyle
    color: Optional[str] = None
    shape: Optional[str] = None
    direction: Optional[Direction] = None
    start_cell: Optional[str] = None
    end_cell: Optional[str] = None
    entry_side: Optional[Side] = None
    appears: bool = False
    disappears: bool = False

    @property
    def named(self):
        return self.color is not None


def _render(style, name, direction=None, start_cell=None, end_cell=None, entry_side=None,
            appears=False, disappears=False, located=True):
    style = ExpressionStyle(style)
    text = f"The {name}"
    if style == ExpressionStyle.APPEARANCE:
        return text
    if style == ExpressionStyle.SPATIAL:
        return f"{text} in the {start_cell}" if located else text

    if appears:
        text += f" appears from the {entry_side.value}," if located else " appears,"
    if direction == Direction.STATIONARY:
        text += f" staying in the {end_cell}" if located else " staying"
    else:
        text += f" moves {direction.value}"
        if located:
            text += f" to the {end_cell}"
    if disappears:
        text += ", and disappears"
    return text


def render_expression(descriptor: MotionDescriptor, shape: ShapeSpec, style,
                      variant=ExpressionVariant.ORIGIN) -> str:
    """
    Fill the template of one style.
    """
    variant = ExpressionVariant(variant)
    name = GENERIC_NAME if variant == ExpressionVariant.NO_NAME else shape.name
    return _render(style, name, descriptor.direction, descriptor.start_cell, descriptor.end_cell,
                   descriptor.entry_side, descriptor.appears, descriptor.disappears,
                   located=variant != ExpressionVariant.NO_LOCATION)


_NAME = r"(?:(?P<color>[a-z]+) (?P<shape>[a-z]+)|object)"
_CELL = r"[a-z]+-[a-z]+"
_MOTION_RE = re.compile(
    rf"^The {_NAME}"
    r"(?P<appear> appears(?: from the (?P<entry>left|right|top|bottom))?,)?"
    rf" (?:moves (?P<direction>[a-z]+(?:-[a-z]+)?)(?: to the (?P<end>{_CELL}))?"
    rf"|(?P<staying>staying)(?: in the (?P<stay>{_CELL}))?)"
    r"(?P<disappear>, and disappears)?$")
_SPATIAL_RE = re.compile(rf"^The {_NAME} in the (?P<start>{_CELL})$")
_APPEARANCE_RE = re.compile(rf"^The {_NAME}$")


def parse_expression(expression) -> ParsedExpression:
    """
    Invert the templates.
    """
    match = _MOTION_RE.match(expression)
    if match:
        if match["staying"]:
            direction, end_cell = Direction.STATIONARY, match["stay"]
        else:
            try:
                direction = Direction(match["direction"])
            except ValueError:
                raise ExpressionParseError(f"Unknown direction in {expression!r}.") from None
            if direction == Direction.STATIONARY:
                raise ExpressionParseError(f"Stationary objects do not 'move': {expression!r}.")
            end_cell = match["end"]
        return ParsedExpression(ExpressionStyle.MOTION, match["color"], match["shape"], direction,
                                end_cell=end_cell,
                                entry_side=Side(match["entry"]) if match["entry"] else None,
                                appears=bool(match["appear"]), disappears=bool(match["disappear"]))
    match = _SPATIAL_RE.match(expression)
    if match:
        return ParsedExpression(ExpressionStyle.SPATIAL, match["color"], match["shape"],
                                start_cell=match["start"])
    match = _APPEARANCE_RE.match(expression)
    if match:
        return ParsedExpression(ExpressionStyle.APPEARANCE, match["color"], match["shape"])
    raise ExpressionParseError(f"Expression does not match any template: {expression!r}.")


def restyle_expression(expression, variant) -> str:
    """
    Re-render an origin-variant expression as another variant.
    """
    variant = ExpressionVariant(variant)
    parsed = parse_expression(expression)
    if not parsed.named and variant != ExpressionVariant.NO_NAME:
        raise ExpressionParseError(f"Cannot restore the object name of {expression!r}.")
    located = variant != ExpressionVariant.NO_LOCATION
    if located and parsed.style != ExpressionStyle.APPEARANCE:
        has_cells = parsed.start_cell or parsed.end_cell
        if not has_cells or (parsed.appears and parsed.entry_side is None):
            raise ExpressionParseError(f"Cannot restore the locations of {expression!r}.")
    name = GENERIC_NAME if variant == ExpressionVariant.NO_NAME else f"{parsed.color} {parsed.shape}"
    return _render(parsed.style, name, parsed.direction, parsed.start_cell, parsed.end_cell,
                   parsed.entry_side, parsed.appears, parsed.disappears, located=located)

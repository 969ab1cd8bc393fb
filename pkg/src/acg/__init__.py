"""Almost-commuting nonlocal games: values, defects, optimization and semidecision."""

from .errors import BudgetError, EigenError, FormatError, NotPSDError, ShapeError
from .game import Game, make_chsh, make_game, parse_game, random_game, serialize_game, validate
from .linalg import State, eig_herm, sqrt_psd
from .strategy import (
    MeasurementFamily,
    Povm,
    Strategy,
    bullet,
    correlation_table,
    defects,
    game_operator,
    game_value,
    round_to_povm,
    tsirelson_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "EigenError",
    "FormatError",
    "Game",
    "MeasurementFamily",
    "NotPSDError",
    "Povm",
    "ShapeError",
    "State",
    "Strategy",
    "bullet",
    "correlation_table",
    "defects",
    "eig_herm",
    "game_operator",
    "game_value",
    "make_chsh",
    "make_game",
    "parse_game",
    "random_game",
    "round_to_povm",
    "serialize_game",
    "sqrt_psd",
    "tsirelson_strategy",
    "validate",
]

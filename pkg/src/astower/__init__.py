"""astower: exact defect Artin-Schreier towers with verified transform steps."""

from .field import FieldElem, FiniteField
from .series import ShiftedSeries, TruncSeries

__all__ = ["FieldElem", "FiniteField", "ShiftedSeries", "TruncSeries"]
__version__ = "0.1.0"

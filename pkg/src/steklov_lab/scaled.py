"""Overflow-safe reals: sign * mantissa * exp(log_scale) with mantissa in [1, 2)."""
import math

LN2 = math.log(2.0)
ALIGN_LIMIT = 700.0


class ScaledValue:
    __slots__ = ("mantissa", "log_scale")

    def __init__(self, mantissa, log_scale=0.0):
        # normalise so that |mantissa| is in [1, 2)
        if mantissa == 0.0 or not math.isfinite(mantissa):
            object.__setattr__(self, "mantissa", float(mantissa))
            object.__setattr__(self, "log_scale", 0.0 if mantissa == 0.0 else float(log_scale))
            return
        m, e = math.frexp(mantissa)  # |m| in [0.5, 1)
        object.__setattr__(self, "mantissa", 2.0 * m)
        object.__setattr__(self, "log_scale", float(log_scale) + (e - 1) * LN2)

    def __setattr__(self, name, value):
        raise AttributeError("ScaledValue is immutable")

    @classmethod
    def from_float(cls, x):
        return cls(float(x), 0.0)

    @classmethod
    def from_log(cls, log_abs, sign=1.0):
        return cls(math.copysign(1.0, sign), log_abs)

    # accessors ---------------------------------------------------------------
    @property
    def sign(self):
        return 0.0 if self.mantissa == 0.0 else math.copysign(1.0, self.mantissa)

    @property
    def log_abs(self):
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def __float__(self):
        if self.mantissa == 0.0:
            return 0.0
        if self.log_scale > 709.0:
            return math.copysign(math.inf, self.mantissa)
        if self.log_scale < -745.0:
            return 0.0 * self.mantissa
        return self.mantissa * math.exp(self.log_scale)

    def __abs__(self):
        return ScaledValue(abs(self.mantissa), self.log_scale)

    def __neg__(self):
        return ScaledValue(-self.mantissa, self.log_scale)

    # arithmetic --------------------------------------------------------------
    def __mul__(self, other):
        other = _as_scaled(other)
        return ScaledValue(self.mantissa * other.mantissa, self.log_scale + other.log_scale)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_scaled(other)
        if other.mantissa == 0.0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        return ScaledValue(self.mantissa / other.mantissa, self.log_scale - other.log_scale)

    def __rtruediv__(self, other):
        return _as_scaled(other) / self

    def __add__(self, other):
        other = _as_scaled(other)
        if self.mantissa == 0.0:
            return other
        if other.mantissa == 0.0:
            return self
        big, small = (self, other) if self.log_scale >= other.log_scale else (other, self)
        gap = big.log_scale - small.log_scale
        if gap >= ALIGN_LIMIT:
            # below double resolution of the larger term
            return big
        return ScaledValue(big.mantissa + small.mantissa * math.exp(-gap), big.log_scale)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_scaled(other))

    def __rsub__(self, other):
        return _as_scaled(other) - self

    def __eq__(self, other):
        try:
            other = _as_scaled(other)
        except TypeError:
            return NotImplemented
        return self.mantissa == other.mantissa and (self.mantissa == 0.0 or self.log_scale == other.log_scale)

    def __hash__(self):
        return hash((self.mantissa, self.log_scale))

    def rel_diff(self, other):
        """|self - other| / max(|self|, |other|)."""
        other = _as_scaled(other)
        num = self - other
        if num.mantissa == 0.0:
            return 0.0
        den = max(self.log_abs, other.log_abs)
        return math.exp(num.log_abs - den)

    def __repr__(self):
        return f"ScaledValue({self.mantissa!r}, {self.log_scale!r})"


def _as_scaled(x):
    if isinstance(x, ScaledValue):
        return x
    if isinstance(x, (int, float)):
        return ScaledValue(float(x), 0.0)
    try:
        return ScaledValue(float(x), 0.0)
    except Exception:
        raise TypeError(f"cannot convert {type(x).__name__} to ScaledValue") from None

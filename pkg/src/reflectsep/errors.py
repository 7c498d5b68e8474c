"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when array shapes do not satisfy an operation's contract."""


class DivergenceError(RuntimeError):
    """Raised when a solver update produces non-finite values.

    Carries enough context to report which stage of which layer failed.
    """

    def __init__(self, stage: str, scale: int, layer: int):
        self.stage = stage
        self.scale = scale
        self.layer = layer
        super().__init__(
            f"non-finite values after {stage} (scale {scale}, layer {layer})"
        )

    def __reduce__(self):
        # Keeps the exception picklable across process-pool boundaries.
        return (DivergenceError, (self.stage, self.scale, self.layer))

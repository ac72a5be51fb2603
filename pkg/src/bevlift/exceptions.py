"""Exception hierarchy. Every failure path in the toolkit raises one of these."""


class BevliftError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(BevliftError, ValueError):
    """Invalid configuration or parameter value."""


class KittiFormatError(BevliftError, ValueError):
    """Base class for KITTI file parsing/serialization failures."""


class MalformedFileError(KittiFormatError):
    pass


class MalformedPointError(KittiFormatError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite value in point record {index}")


class LabelParseError(KittiFormatError):
    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class CalibrationError(KittiFormatError):
    pass


class SerializationError(KittiFormatError):
    pass


class TensorFormatError(BevliftError, ValueError):
    """Malformed BEVT tensor container."""


class InsufficientPointsError(BevliftError, ValueError):
    pass


class DegenerateGeometryError(BevliftError, ValueError):
    pass


class ShapeMismatchError(BevliftError, ValueError):
    pass


class FrameMismatchError(BevliftError, ValueError):
    def __init__(self, missing_detections, missing_ground_truth):
        self.missing_detections = sorted(missing_detections)
        self.missing_ground_truth = sorted(missing_ground_truth)
        parts = []
        if self.missing_detections:
            parts.append("no detections for frames: " + ", ".join(self.missing_detections))
        if self.missing_ground_truth:
            parts.append("no ground truth for frames: " + ", ".join(self.missing_ground_truth))
        super().__init__("; ".join(parts))

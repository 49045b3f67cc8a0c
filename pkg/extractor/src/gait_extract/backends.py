"""Pose-estimation backends.

A backend turns one BGR frame into 33 landmarks with a confidence score, or
None when no person is found. The shipped backend wraps the MediaPipe pose
landmarker (33-point convention, x/y image-normalized, z relative depth);
it is imported lazily so the extractor stays usable for tooling and tests
without the model installed.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

N_LANDMARKS = 33

MODEL_VARIANTS = {"lite": 0, "full": 1, "heavy": 2}


class PoseBackend(Protocol):
    def detect(self, frame_bgr: np.ndarray) -> tuple[np.ndarray, float] | None:
        """Return ((33, 3) landmark array, confidence in [0, 1]) or None."""

    def close(self) -> None: ...


class MediapipeBackend:
    """MediaPipe pose wrapper.

    ``static`` runs the detector independently per frame, which is the
    closest the estimator gets to deterministic output; tracking mode is
    faster but carries state between frames. Frame confidence is the mean
    landmark visibility.
    """

    def __init__(self, model_variant: str = "full", static: bool = True,
                 min_detection_confidence: float = 0.5):
        if model_variant not in MODEL_VARIANTS:
            raise ValueError(f"model_variant must be one of {sorted(MODEL_VARIANTS)}")
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise RuntimeError(
                "mediapipe is not installed; install the 'pose' extra (pip install gait-extract[pose])"
            ) from exc
        self._pose = mp.solutions.pose.Pose(
            static_image_mode=static,
            model_complexity=MODEL_VARIANTS[model_variant],
            min_detection_confidence=min_detection_confidence,
        )

    def detect(self, frame_bgr: np.ndarray) -> tuple[np.ndarray, float] | None:
        import cv2

        rgb = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
        result = self._pose.process(rgb)
        if result.pose_landmarks is None:
            return None
        landmarks = result.pose_landmarks.landmark
        if len(landmarks) != N_LANDMARKS:
            return None
        coords = np.array([[lm.x, lm.y, lm.z] for lm in landmarks], dtype=np.float64)
        if not np.all(np.isfinite(coords)):
            return None
        confidence = float(np.mean([lm.visibility for lm in landmarks]))
        return coords, confidence

    def close(self) -> None:
        self._pose.close()

"""
Pairwise influence rules applied when two agents meet.

All rules are pure; the only stateful input is the sign source handed to
``influence_on_hsi``, which is called at most once and only when the two
secondary attitudes are exactly equal.
"""
from typing import Callable

from app.schemas.model import Attitude, ModelParams

SignSource = Callable[[], int]


class InfluenceService:
    """Service applying the meeting rules of non-HSI and HSI agents"""

    @staticmethod
    def attract(self: Attitude, peer: Attitude, mu: float) -> Attitude:
        return Attitude(
            self.main + mu * (peer.main - self.main),
            self.secondary + mu * (peer.secondary - self.secondary),
        )

    @staticmethod
    def influence_on_non_hsi(self: Attitude, peer: Attitude, params: ModelParams) -> Attitude:
        """
        Attraction on both issues when close on both, indifference otherwise

        Args:
            self: Attitude of the influenced agent
            peer: Attitude of the agent it meets
            params: Model parameters (thresholds and mu)

        Returns:
            The unclamped new attitude
        """
        if abs(self.main - peer.main) <= params.u_m and abs(self.secondary - peer.secondary) <= params.u_s:
            return InfluenceService.attract(self, peer, params.mu)
        return self

    @staticmethod
    def influence_on_hsi(
        self: Attitude, peer: Attitude, params: ModelParams, tie_break: SignSource
    ) -> Attitude:
        """
        Attraction on both issues when close on the main one; rejection on the
        secondary issue when far on the main one but close on the secondary one.

        Args:
            self: Attitude of the influenced HSI agent
            peer: Attitude of the agent it meets
            params: Model parameters (thresholds and mu)
            tie_break: Source of -1/+1, consumed only when both secondary
                attitudes are exactly equal

        Returns:
            The unclamped new attitude
        """
        if abs(self.main - peer.main) <= params.u_m:
            return InfluenceService.attract(self, peer, params.mu)

        if abs(self.secondary - peer.secondary) > params.u_s:
            return self

        gap = peer.secondary - self.secondary
        if self.secondary - peer.secondary < 0:
            shift = -params.mu * (params.u_s - gap)
        elif gap != 0:
            shift = params.mu * (params.u_s + gap)
        else:
            shift = tie_break() * params.mu * params.u_s
        return Attitude(self.main, self.secondary + shift)

    @staticmethod
    def clamp(attitude: Attitude, params: ModelParams) -> Attitude:
        """Confine both coordinates to [-1, +1] in bounded runs; unbounded runs are untouched"""
        if not params.bounded:
            return attitude
        main, secondary = attitude
        if -1.0 <= main <= 1.0 and -1.0 <= secondary <= 1.0:
            return attitude
        return Attitude(min(1.0, max(-1.0, main)), min(1.0, max(-1.0, secondary)))

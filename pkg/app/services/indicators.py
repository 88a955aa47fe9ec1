"""
Population indicators: single-linkage clusters, average absolute opinion,
density histograms and the final-state pattern taxonomy.
"""
import logging
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from app.core.errors import IndicatorError
from app.schemas.indicators import (
    ClassifierThresholds,
    Cluster,
    DensityHistogram,
    Dimension,
    IndicatorReport,
    IndicatorSettings,
    NormChange,
    PatternCode,
)
from app.schemas.model import Attitude
from app.schemas.run import Snapshot, TrajectoryRecord

logger = logging.getLogger(__name__)

# cells holding more agents than this are linked to their neighbours with a
# nearest-neighbour query instead of enumerating every pair
DENSE_CELL_SIZE = 16

Points = Union[Snapshot, np.ndarray, Sequence[Tuple[float, float]]]


def _as_points(snapshot: Points) -> np.ndarray:
    if isinstance(snapshot, Snapshot):
        points = snapshot.points
    else:
        points = np.asarray(snapshot, dtype=np.float64).reshape(-1, 2)
    if len(points) == 0:
        raise IndicatorError("Snapshot holds no agents")
    return points


def _linkage_edges(points: np.ndarray, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Edges whose connected components are the single-linkage clusters at
    radius epsilon (distance <= epsilon links two agents).

    Agents are binned in square cells of side epsilon / 2, so agents sharing a
    cell are always linked and linked agents are at most two cells apart.
    """
    cells = np.floor(points / (epsilon / 2.0)).astype(np.int64)
    keys, first_member, cell_of, counts = np.unique(
        cells, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    cell_of = cell_of.reshape(-1)
    indices = np.arange(len(points))

    rows = [indices]
    cols = [first_member[cell_of]]

    dense_cell = counts > DENSE_CELL_SIZE
    sparse = np.flatnonzero(~dense_cell[cell_of])
    if len(sparse) > 1:
        pairs = cKDTree(points[sparse]).query_pairs(epsilon, output_type="ndarray")
        if len(pairs):
            rows.append(sparse[pairs[:, 0]])
            cols.append(sparse[pairs[:, 1]])

    if dense_cell.any():
        order = np.argsort(cell_of, kind="stable")
        members_by_cell: Dict[Tuple[int, int], np.ndarray] = dict(
            zip(map(tuple, keys.tolist()), np.split(order, np.cumsum(counts)[:-1]))
        )
        bound = np.nextafter(epsilon, np.inf)
        for c in np.flatnonzero(dense_cell):
            cx, cy = keys[c].tolist()
            members = members_by_cell[(cx, cy)]
            neighbours = [
                members_by_cell[(cx + dx, cy + dy)]
                for dx in range(-2, 3)
                for dy in range(-2, 3)
                if (dx or dy) and (cx + dx, cy + dy) in members_by_cell
            ]
            if not neighbours:
                continue
            candidates = np.concatenate(neighbours)
            distance, _ = cKDTree(points[members]).query(
                points[candidates], k=1, distance_upper_bound=bound
            )
            linked = candidates[distance <= epsilon]
            rows.append(linked)
            cols.append(np.full(len(linked), first_member[c]))

    return np.concatenate(rows), np.concatenate(cols)




class IndicatorService:
    """Service computing population indicators and classifying final states"""

    @staticmethod
    def cluster_labels(snapshot: Points, epsilon: float) -> np.ndarray:
        """Component label of every agent under single linkage"""
        if not epsilon > 0:
            raise IndicatorError(f"Cluster epsilon must be > 0, got {epsilon}")
        points = _as_points(snapshot)
        n = len(points)
        rows, cols = _linkage_edges(points, epsilon)
        graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        return labels

    @staticmethod
    def detect_clusters(snapshot: Points, epsilon: float) -> List[Cluster]:
        """
        Single-linkage clusters: agents at distance <= epsilon share a cluster

        Args:
            snapshot: Snapshot or (N, 2) attitudes
            epsilon: Linkage radius

        Returns:
            Clusters ordered by descending share, then smallest member index
        """
        points = _as_points(snapshot)
        labels = IndicatorService.cluster_labels(points, epsilon)
        n = len(points)

        order = np.argsort(labels, kind="stable").astype(np.int32)
        sizes = np.bincount(labels)
        groups = np.split(order, np.cumsum(sizes)[:-1])
        groups.sort(key=lambda members: (-len(members), int(members[0])))

        clusters = []
        for members in groups:
            centroid = points[members].mean(axis=0)
            clusters.append(
                Cluster(
                    centroid=Attitude(float(centroid[0]), float(centroid[1])),
                    share=len(members) / n,
                    size=len(members),
                    member_indices=members,
                )
            )
        return clusters

    @staticmethod
    def projected_cluster_sizes(values: np.ndarray, epsilon: float) -> np.ndarray:
        """Cluster sizes of 1D single linkage: consecutive sorted values further than epsilon apart split"""
        ordered = np.sort(np.asarray(values, dtype=np.float64))
        breaks = np.flatnonzero(np.diff(ordered) > epsilon) + 1
        bounds = np.concatenate(([0], breaks, [len(ordered)]))
        return np.diff(bounds)

    @staticmethod
    def avg_abs_opinion(snapshot: Points) -> Tuple[float, float]:
        points = _as_points(snapshot)
        means = np.abs(points).mean(axis=0)
        return float(means[0]), float(means[1])

    @staticmethod
    def density_bounds(snapshot: Points) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """[-1, +1] per dimension, widened symmetrically to whole units for unbounded runs"""
        points = _as_points(snapshot)
        half_widths = np.maximum(1.0, np.ceil(np.abs(points).max(axis=0)))
        return tuple((-float(w), float(w)) for w in half_widths)

    @staticmethod
    def density_histogram(
        snapshot: Points,
        bins: int = 50,
        bounds: Tuple[Tuple[float, float], Tuple[float, float]] = ((-1.0, 1.0), (-1.0, 1.0)),
    ) -> DensityHistogram:
        """
        Per-dimension counts and the 2D count grid

        Args:
            snapshot: Snapshot or (N, 2) attitudes
            bins: Bins per dimension
            bounds: (low, high) per dimension; values outside (unbounded runs)
                are counted in the first or last bin

        Returns:
            Bin edges, 1D counts and the bins x bins grid
        """
        if bins < 2:
            raise IndicatorError(f"At least 2 bins are required, got {bins}")
        for low, high in bounds:
            if not low < high:
                raise IndicatorError(f"Empty histogram bounds [{low}, {high}]")
        points = _as_points(snapshot)
        (main_low, main_high), (sec_low, sec_high) = bounds
        main = np.clip(points[:, 0], main_low, main_high)
        secondary = np.clip(points[:, 1], sec_low, sec_high)

        counts_main, edges_main = np.histogram(main, bins=bins, range=(main_low, main_high))
        counts_secondary, edges_secondary = np.histogram(secondary, bins=bins, range=(sec_low, sec_high))
        grid, _, _ = np.histogram2d(main, secondary, bins=bins, range=[[main_low, main_high], [sec_low, sec_high]])
        return DensityHistogram(
            edges_main=edges_main,
            edges_secondary=edges_secondary,
            counts_main=counts_main,
            counts_secondary=counts_secondary,
            grid=grid.astype(np.int64),
        )

    @staticmethod
    def compute_report(snapshot: Points, settings: IndicatorSettings = IndicatorSettings()) -> IndicatorReport:
        """
        Compute the indicators of one population state

        Args:
            snapshot: Snapshot or (N, 2) attitudes
            settings: Linkage radius and major-cluster share threshold

        Returns:
            Clusters, major counts (joint and projected), major coverage and
            average absolute opinions
        """
        points = _as_points(snapshot)
        n = len(points)
        clusters = IndicatorService.detect_clusters(points, settings.cluster_epsilon)
        threshold = settings.major_share_threshold

        def major(sizes) -> int:
            return int(np.count_nonzero(np.asarray(sizes) / n > threshold))

        major_sizes = [cluster.size for cluster in clusters if cluster.share > threshold]
        avg_main, avg_secondary = IndicatorService.avg_abs_opinion(points)
        report = IndicatorReport(
            clusters=clusters,
            n_clusters=len(clusters),
            max_cluster_share=clusters[0].share,
            n_major_clusters=len(major_sizes),
            major_coverage=sum(major_sizes) / n,
            avg_abs_main=avg_main,
            avg_abs_secondary=avg_secondary,
            n_major_main=major(IndicatorService.projected_cluster_sizes(points[:, 0], settings.cluster_epsilon)),
            n_major_secondary=major(IndicatorService.projected_cluster_sizes(points[:, 1], settings.cluster_epsilon)),
        )
        logger.debug(
            f"{len(clusters)} clusters, {report.n_major_clusters} major covering {report.major_coverage:.3f} "
            f"(epsilon={settings.cluster_epsilon:g})"
        )
        return report

    @staticmethod
    def trajectory_record(snapshot: Snapshot, settings: IndicatorSettings) -> TrajectoryRecord:
        """Indicators captured during a run; n_clusters counts major clusters"""
        points = snapshot.points
        labels = IndicatorService.cluster_labels(points, settings.cluster_epsilon)
        shares = np.bincount(labels) / len(points)
        avg_main, avg_secondary = IndicatorService.avg_abs_opinion(points)
        return TrajectoryRecord(
            sweep=snapshot.sweep,
            avg_abs_main=avg_main,
            avg_abs_secondary=avg_secondary,
            n_clusters=int(np.count_nonzero(shares > settings.major_share_threshold)),
            max_cluster_share=float(min(1.0, shares.max())),
        )

    @staticmethod
    def classify_pattern(
        report: IndicatorReport,
        dimension: Dimension,
        thresholds: ClassifierThresholds = ClassifierThresholds(),
    ) -> PatternCode:
        """
        Pattern code of one dimension

        A state whose major clusters together hold less than
        min_major_coverage of the population has not condensed and is
        unclassified, whatever the count basis.

        Args:
            report: Indicators of the state
            dimension: Dimension to classify
            thresholds: Classifier calibration

        Returns:
            The pattern code
        """
        if thresholds.count_basis == "joint":
            n_major = report.n_major_clusters
        else:
            n_major = report.n_major_on(dimension)
        value = report.avg_abs(dimension)

        if n_major == 0 or report.major_coverage < thresholds.min_major_coverage:
            return PatternCode.UNCLASSIFIED
        if n_major == 1:
            if value <= thresholds.single_moderate_max:
                return PatternCode.SINGLE_MODERATE
            return PatternCode.SINGLE_EXTREME

        baseline = thresholds.odd_baseline if n_major % 2 else thresholds.even_baseline
        if value <= baseline + thresholds.moderate_margin:
            return PatternCode.SEVERAL_MODERATE
        if n_major == 2:
            return PatternCode.BIPOLARIZATION
        return PatternCode.SEVERAL_POLARIZED

    @staticmethod
    def classify_both(
        report: IndicatorReport, thresholds: ClassifierThresholds = ClassifierThresholds()
    ) -> Tuple[PatternCode, PatternCode]:
        return (
            IndicatorService.classify_pattern(report, Dimension.MAIN, thresholds),
            IndicatorService.classify_pattern(report, Dimension.SECONDARY, thresholds),
        )

    @staticmethod
    def interpret_norm_change(
        trajectory: Sequence[TrajectoryRecord],
        dimension: Dimension,
        thresholds: ClassifierThresholds = ClassifierThresholds(),
    ) -> NormChange:
        """
        Reading of the average absolute opinion series of one dimension

        Args:
            trajectory: Records of a run, at least 2
            dimension: Dimension to read
            thresholds: dip_threshold and rise_threshold

        Returns:
            The norm change of the run
        """
        if len(trajectory) < 2:
            raise IndicatorError(f"Norm change needs at least 2 records, got {len(trajectory)}")
        attribute = "avg_abs_main" if dimension is Dimension.MAIN else "avg_abs_secondary"
        series = [getattr(record, attribute) for record in trajectory]
        final = series[-1]

        if final > thresholds.rise_threshold:
            if min(series[:-1]) < thresholds.dip_threshold:
                return NormChange.POLARIZED_AFTER_MODERATION
            return NormChange.POLARIZED_DIRECTLY
        if final < thresholds.dip_threshold:
            return NormChange.MODERATED
        return NormChange.NO_CHANGE

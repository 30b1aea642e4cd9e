"""Tests for learning-speed recording and batch composition"""
import numpy as np
import pytest

from sunkcost.models.specs import SamplerMode, SamplerSpec
from sunkcost.sampling.learning_speed import (
    CorrectnessMatrix,
    LearningSpeedError,
    LearningSpeedTable,
    record_learning_speed,
)
from sunkcost.sampling.samplers import (
    BatchSampler,
    SamplerError,
    affected_per_side,
    easy_hard_order,
    easy_hard_weights,
    sample_batch,
)

DRAWS = 1_000_000


def _within_3_sigma(count: int, n: int, p: float) -> bool:
    sigma = np.sqrt(n * p * (1.0 - p))
    return abs(count - n * p) <= 3.0 * sigma


class TestLearningSpeed:
    """Test correctness matrices and the learning-speed table"""

    def test_fraction_of_correct_epochs(self):
        """Test ls is the share of epochs a sample ended correct"""
        matrix = CorrectnessMatrix(
            ids=np.array([5, 7, 9]),
            correct=np.array([[1, 1, 0, 1], [0, 0, 0, 0], [1, 1, 1, 1]], dtype=bool),
        )
        table = record_learning_speed(matrix)
        assert table.as_dict() == {5: 0.75, 7: 0.0, 9: 1.0}

    def test_speed_is_monotone_in_correct_epochs(self):
        """Test one more correct epoch never lowers ls"""
        rng = np.random.default_rng(0)
        correct = rng.random((50, 6)) < 0.5
        more = correct.copy()
        more[:, 0] = True
        ids = np.arange(50)
        low = record_learning_speed(CorrectnessMatrix(ids=ids, correct=correct)).speeds
        high = record_learning_speed(CorrectnessMatrix(ids=ids, correct=more)).speeds
        assert np.all(high >= low)
        assert np.all((low >= 0.0) & (high <= 1.0))

    def test_zero_epochs_rejected(self):
        """Test recording needs at least one epoch"""
        matrix = CorrectnessMatrix.from_columns(np.arange(3), [])
        with pytest.raises(LearningSpeedError):
            record_learning_speed(matrix)

    def test_ragged_column_rejected(self):
        """Test every epoch column covers every sample"""
        with pytest.raises(LearningSpeedError):
            CorrectnessMatrix.from_columns(np.arange(3), [np.ones(3, bool), np.ones(2, bool)])

    def test_table_csv_round_trip(self, tmp_path):
        """Test the id,ls CSV reads back to the same table"""
        table = LearningSpeedTable(ids=np.array([3, 1, 2]), speeds=np.array([0.5, 1.0, 1 / 3]))
        table.to_csv(tmp_path / "ls.csv")
        loaded = LearningSpeedTable.from_csv(tmp_path / "ls.csv")
        assert loaded.as_dict() == table.as_dict()
        assert (tmp_path / "ls.csv").read_text().splitlines()[0] == "id,ls"

    def test_learning_order_export(self, tmp_path):
        """Test the correctness matrix CSV has id, ls and one column per epoch"""
        matrix = CorrectnessMatrix(ids=np.array([4]), correct=np.array([[True, False]]))
        matrix.to_csv(tmp_path / "order.csv")
        lines = (tmp_path / "order.csv").read_text().splitlines()
        assert lines == ["id,ls,epoch_1,epoch_2", "4,0.5,1,0"]

    def test_lookup_and_missing_ids(self):
        """Test lookup follows ids and rejects unknown ones"""
        table = LearningSpeedTable(ids=np.array([10, 20]), speeds=np.array([0.1, 0.2]))
        np.testing.assert_array_equal(table.lookup(np.array([20, 10])), [0.2, 0.1])
        with pytest.raises(LearningSpeedError):
            table.lookup(np.array([30]))

    def test_out_of_range_speed_rejected(self):
        """Test speeds outside [0, 1] are invalid"""
        with pytest.raises(LearningSpeedError):
            LearningSpeedTable(ids=np.array([1]), speeds=np.array([1.5]))


class TestEasyHardWeights:
    """Test the easy/hard weighting rule"""

    def test_affected_count(self):
        """Test c/2 of the samples are affected at each end"""
        assert affected_per_side(100, 0.2) == 10
        assert affected_per_side(10, 0.2) == 1
        assert affected_per_side(9, 0.2) == 0
        assert affected_per_side(100, 0.0) == 0

    def test_easiest_and_hardest_get_r(self):
        """Test the ends of the easy-to-hard order weigh r and the middle 1"""
        table = LearningSpeedTable(ids=np.arange(10), speeds=np.linspace(1.0, 0.0, 10))
        weights = easy_hard_weights(table, c=0.2, r=0.1)
        assert weights[0] == 0.1
        assert weights[9] == 0.1
        assert all(weights[i] == 1.0 for i in range(1, 9))

    def test_ties_broken_by_id(self):
        """Test equal speeds order by ascending id"""
        table = LearningSpeedTable(ids=np.array([7, 3, 5, 1]), speeds=np.full(4, 0.5))
        assert table.ids[easy_hard_order(table)].tolist() == [1, 3, 5, 7]

    def test_ordering_is_deterministic(self):
        """Test identical tables give identical affected sets"""
        rng = np.random.default_rng(0)
        speeds = rng.integers(0, 5, size=40) / 4
        a = easy_hard_weights(LearningSpeedTable(ids=np.arange(40), speeds=speeds), 0.3, 0.0)
        b = easy_hard_weights(LearningSpeedTable(ids=np.arange(40), speeds=speeds), 0.3, 0.0)
        assert a == b

    def test_empty_table_rejected(self):
        """Test an empty table cannot produce weights"""
        empty = LearningSpeedTable(ids=np.zeros(0, dtype=int), speeds=np.zeros(0))
        with pytest.raises(SamplerError):
            easy_hard_weights(empty, 0.2, 0.1)

    def test_hundred_old_samples_probability(self, make_dataset):
        """Test an affected sample's per-draw probability is 0.1 / 82"""
        data = make_dataset(100)
        table = LearningSpeedTable(ids=data.ids, speeds=np.linspace(1.0, 0.0, 100))
        spec = SamplerSpec(mode=SamplerMode.EASY_HARD, c=0.2, r=0.1).with_table(table)
        sampler = BatchSampler(spec, data)
        assert sampler.probabilities[0] == pytest.approx(0.1 / 82, rel=1e-12)
        assert sampler.probabilities[50] == pytest.approx(1.0 / 82, rel=1e-12)
        assert sampler.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


class TestBatchSampler:
    """Test batch composition modes"""

    def test_balanced_batch_is_half_and_half(self, make_dataset):
        """Test N=128 gives exactly 64 old and 64 new samples"""
        data = make_dataset(90, 10)
        sampler = BatchSampler(SamplerSpec(mode=SamplerMode.BALANCED), data)
        rows = sampler.draw(128, np.random.default_rng(0))
        assert int((~data.is_new[rows]).sum()) == 64
        assert int(data.is_new[rows].sum()) == 64

    def test_balanced_odd_batch_favours_new(self, make_dataset):
        """Test an odd batch gets floor(N/2) old and ceil(N/2) new"""
        data = make_dataset(5, 5)
        sampler = BatchSampler(SamplerSpec(mode=SamplerMode.BALANCED), data)
        rows = sampler.draw(7, np.random.default_rng(0))
        assert int(data.is_new[rows].sum()) == 4

    def test_balanced_needs_both_origins(self, make_dataset):
        """Test balanced sampling rejects a dataset with no new samples"""
        with pytest.raises(SamplerError):
            BatchSampler(SamplerSpec(mode=SamplerMode.BALANCED), make_dataset(10))

    def test_easy_hard_needs_a_table(self, make_dataset):
        """Test easy_hard without learning speeds raises"""
        with pytest.raises(SamplerError):
            BatchSampler(SamplerSpec(mode=SamplerMode.EASY_HARD), make_dataset(10, 2))

    def test_easy_hard_table_must_cover_old_samples(self, make_dataset):
        """Test a table missing old ids raises"""
        data = make_dataset(10, 2)
        table = LearningSpeedTable(ids=np.arange(5), speeds=np.full(5, 0.5))
        spec = SamplerSpec(mode=SamplerMode.EASY_HARD).with_table(table)
        with pytest.raises(SamplerError):
            BatchSampler(spec, data)

    def test_easy_hard_only_new_samples_is_uniform(self, make_dataset):
        """Test easy_hard with no old samples falls back to uniform draws"""
        data = make_dataset(0, 6)
        sampler = BatchSampler(SamplerSpec(mode=SamplerMode.EASY_HARD), data)
        np.testing.assert_allclose(sampler.probabilities, np.full(6, 1 / 6))

    def test_r_one_equals_proportional(self, make_dataset):
        """Test r=1 recovers the proportional distribution exactly"""
        data = make_dataset(20, 5)
        table = LearningSpeedTable(ids=data.ids[:20], speeds=np.linspace(0.0, 1.0, 20))
        easy_hard = SamplerSpec(mode=SamplerMode.EASY_HARD, c=0.4, r=1.0).with_table(table)
        proportional = SamplerSpec(mode=SamplerMode.PROPORTIONAL)
        a = BatchSampler(easy_hard, data).draw(500, np.random.default_rng(3))
        b = BatchSampler(proportional, data).draw(500, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_sample_batch_returns_ids(self, make_dataset):
        """Test sample_batch reports dataset ids"""
        data = make_dataset(4, 4, id_start=1000)
        ids = sample_batch(SamplerSpec(), data, 32, np.random.default_rng(0))
        assert ids.shape == (32,)
        assert set(ids.tolist()) <= set(range(1000, 1008))

    def test_empty_dataset_rejected(self, make_dataset):
        """Test nothing can be sampled from an empty dataset"""
        with pytest.raises(SamplerError):
            BatchSampler(SamplerSpec(), make_dataset(0))


class TestDrawFrequencies:
    """Monte-Carlo checks over 1e6 draws"""

    def test_proportional_follows_origin_ratio(self, make_dataset):
        """Test 70:30 old:new data gives 70% old draws"""
        data = make_dataset(70, 30)
        rows = BatchSampler(SamplerSpec(), data).draw(DRAWS, np.random.default_rng(11))
        old = int((~data.is_new[rows]).sum())
        assert _within_3_sigma(old, DRAWS, 0.7)
        assert 128 * old / DRAWS == pytest.approx(89.6, abs=0.2)

    @pytest.mark.parametrize("r", [0.0, 0.1, 1.0])
    def test_easy_hard_frequencies(self, make_dataset, r):
        """Test affected, unaffected old and new draw shares match normalized weights"""
        data = make_dataset(10, 10)
        table = LearningSpeedTable(ids=data.ids[:10], speeds=np.linspace(1.0, 0.0, 10))
        spec = SamplerSpec(mode=SamplerMode.EASY_HARD, c=0.2, r=r).with_table(table)
        sampler = BatchSampler(spec, data)
        counts = np.bincount(sampler.draw(DRAWS, np.random.default_rng(12)), minlength=20)

        total = 2 * r + 8 + 10
        groups = {
            "affected": ([0, 9], 2 * r / total),
            "old": (list(range(1, 9)), 8 / total),
            "new": (list(range(10, 20)), 10 / total),
        }
        for rows, p in groups.values():
            assert _within_3_sigma(int(counts[rows].sum()), DRAWS, p)
        if r == 0.0:
            assert counts[0] == 0 and counts[9] == 0

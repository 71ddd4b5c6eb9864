import json

import numpy as np
import pandas as pd
import pytest

from tabcds.errors import LearnerDivergenceError
from tabcds.learning.fitting import check_divergence
from tabcds.utils import atomic_write_text, derive_seed, read_json, stable_json, substream, write_csv, write_json
from tabcds.utils.notification_manager import NotificationManager, NotificationType


class TestNotifications:

    def test_listeners_receive_messages(self):
        received = []

        def listener(message, type_):
            received.append((message, type_))

        NotificationManager.addListener(listener)
        NotificationManager.addListener(listener)
        NotificationManager.notify("round 1 finished", NotificationType.OK)
        assert received == [("round 1 finished", NotificationType.OK)]

        NotificationManager.removeListener(listener)
        NotificationManager.notify("ignored", NotificationType.WARNING)
        assert len(received) == 1

    def test_divergence_is_reported_before_raising(self):
        received = []
        NotificationManager.addListener(lambda message, type_: received.append(type_))
        q = np.zeros((1, 2, 2))
        q[0, 1, 0] = np.inf
        with pytest.raises(LearnerDivergenceError, match=r"s=1, a=0"):
            check_divergence(q, 10.0, sweep=3, learner="CQL")
        assert received == [NotificationType.CRITICAL]

    def test_values_under_cap_pass(self):
        check_divergence(np.full((2, 2, 2), 9.5), 10.0, sweep=0, learner="BRAC")


class TestSeeding:

    def test_streams_are_reproducible_and_distinct(self):
        assert derive_seed(7, 'train') == derive_seed(7, 'train')
        assert derive_seed(7, 'train') != derive_seed(7, 'datagen')
        assert derive_seed(7, 'datagen', 0) != derive_seed(7, 'datagen', 1)
        np.testing.assert_array_equal(substream(1, 'eval').random(4), substream(1, 'eval').random(4))

    def test_unknown_stream(self):
        with pytest.raises(KeyError):
            derive_seed(0, 'nope')
        with pytest.raises(KeyError):
            substream(0, 'nope')


class TestFileOutput:

    def test_stable_json_sorts_and_converts(self):
        text = stable_json({'b': np.float64(1.5), 'a': np.arange(3)})
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': [0, 1, 2], 'b': 1.5}

    def test_atomic_write_leaves_no_temporary(self, tmp_path):
        path = atomic_write_text(tmp_path / "nested" / "out.txt", "hello\n")
        assert path.read_text(encoding="utf-8") == "hello\n"
        assert [p.name for p in path.parent.iterdir()] == ["out.txt"]

    def test_json_round_trip(self, tmp_path):
        path = write_json(tmp_path / "run.json", {'returns': [1.0, 2.0]})
        assert read_json(path) == {'returns': [1.0, 2.0]}

    def test_csv_format(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", pd.DataFrame({'round': [0, 1], 'J_eval': [0.5, 0.25]}))
        assert path.read_bytes() == b"round,J_eval\n0,0.5\n1,0.25\n"

import numpy as np
import pytest

from callsift import dsp
from callsift.ingest import AudioClip, WindowConfig, decode_wav, window
from callsift.synthlab import (
    SynthSpec,
    gen_call,
    gen_corpus,
    gen_two_note_call,
    load_truth,
)

SMALL = SynthSpec(seed=0, n_reference=2, n_positive=2, n_negative=2)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    ref, field, truth = gen_corpus(SMALL, root)
    return root, ref, field, truth


class TestGenCall:
    def test_length_and_range(self):
        clip = gen_call(0, 1000.0, 4000.0, 0.5)
        assert len(clip.samples) == 16000
        assert np.abs(clip.samples).max() <= 1.0

    def test_envelope_fades_in_and_out(self):
        clip = gen_call(0, 1000.0, 4000.0, 0.5)
        assert abs(clip.samples[0]) < 1e-6
        assert abs(clip.samples[-1]) < 1e-3
        mid = np.abs(clip.samples[7000:9000]).max()
        assert mid > 0.5 * np.abs(clip.samples).max()

    def test_frequency_rises(self):
        clip = gen_call(0, 1000.0, 6000.0, 1.0)
        head = np.abs(np.fft.rfft(clip.samples[2000:6000]))
        tail = np.abs(np.fft.rfft(clip.samples[26000:30000]))
        f_head = np.argmax(head) * 32000 / 4000
        f_tail = np.argmax(tail) * 32000 / 4000
        assert f_tail > f_head + 2000

    def test_nyquist_rejected(self):
        with pytest.raises(ValueError):
            gen_call(0, 1000.0, 20000.0, 0.5)

    def test_deterministic(self):
        a = gen_call(5, 1500.0, 5000.0, 0.5)
        b = gen_call(5, 1500.0, 5000.0, 0.5)
        assert np.array_equal(a.samples, b.samples)


class TestTwoNoteCall:
    def test_detectable_when_clean(self, filterbank):
        call = gen_two_note_call(1, 1500.0, 5200.0, 0.9)
        x = np.zeros(32000)
        x[: len(call.samples)] += call.samples
        w = window(AudioClip(x, 32000, "r"), WindowConfig())[0]
        spec = dsp.log_mel(w, 32000, filterbank=filterbank)
        assert dsp.detector_score(spec.values) > 0.3

    def test_two_notes_in_time(self):
        call = gen_two_note_call(1, 1500.0, 5200.0, 0.9)
        n = len(call.samples)
        first = call.samples[: int(n * 7 / 15)]
        gap = call.samples[int(n * 7.1 / 15) : int(n * 7.9 / 15)]
        second = call.samples[int(n * 8 / 15) :]
        assert np.abs(first).max() > 10 * max(np.abs(gap).max(), 1e-9)
        assert np.abs(second).max() > 10 * max(np.abs(gap).max(), 1e-9)

    def test_note_bands_ordered(self):
        call = gen_two_note_call(2, 1500.0, 5200.0, 0.9)
        n = len(call.samples)
        lo = np.abs(np.fft.rfft(call.samples[: n * 7 // 15]))
        hi = np.abs(np.fft.rfft(call.samples[n * 8 // 15 :]))
        f_lo = np.argmax(lo) / (n * 7 // 15) * 32000
        f_hi = np.argmax(hi) / (n - n * 8 // 15) * 32000
        assert f_lo < 3000 < f_hi


class TestGenCorpus:
    def test_layout_and_counts(self, corpus):
        root, ref, field, truth_path = corpus
        assert len(ref) == 2 and len(field) == 4
        assert all(p.parent.name == "reference" for p in ref)
        assert all(p.parent.name == "field" for p in field)
        assert truth_path.name == "truth.csv"

    def test_truth_csv_round_trip(self, corpus):
        _, _, _, truth_path = corpus
        truth = load_truth(truth_path)
        assert truth == {
            "field000": True,
            "field001": True,
            "field002": False,
            "field003": False,
        }

    def test_recordings_decode_to_spec_length(self, corpus):
        _, ref, field, _ = corpus
        for p in ref + field:
            clip = decode_wav(p.read_bytes())
            assert clip.sample_rate == 32000
            assert len(clip.samples) == 3 * 32000

    def test_positives_pass_field_detector_twice(self, corpus, filterbank):
        _, _, field, truth_path = corpus
        truth = load_truth(truth_path)
        for p in field:
            clip = decode_wav(p.read_bytes(), p.stem)
            n_pass = sum(
                dsp.detector_score(
                    dsp.log_mel(w, 32000, filterbank=filterbank).values
                )
                >= 0.1
                for w in window(AudioClip(clip.samples, 32000, p.stem), WindowConfig())
            )
            if truth[p.stem]:
                assert n_pass >= 2
            else:
                assert n_pass == 0

    def test_reference_recordings_have_reviewable_windows(self, corpus, filterbank):
        _, ref, _, _ = corpus
        total = 0
        for p in ref:
            clip = decode_wav(p.read_bytes(), p.stem)
            total += sum(
                dsp.detector_score(
                    dsp.log_mel(w, 32000, filterbank=filterbank).values
                )
                > 0.3
                for w in window(AudioClip(clip.samples, 32000, p.stem), WindowConfig())
            )
        assert total >= 2

    def test_deterministic_given_seed(self, corpus, tmp_path):
        root, ref, _, _ = corpus
        ref2, _, _ = gen_corpus(SMALL, tmp_path)
        for a, b in zip(ref, ref2):
            assert a.read_bytes() == b.read_bytes()

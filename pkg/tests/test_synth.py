"""Synthetic corpus generator: apportionment, balance, label semantics,
determinism and the image file format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memefusion.corpus import ingest_metadata
from memefusion.synth import (
    CATEGORIES,
    MARKER_WORD,
    SynthSpec,
    apportion,
    generate_corpus,
    read_image,
    recover_concept_bit,
    render_image,
    vocabulary_words,
    write_corpus,
    write_image,
)


def spec(**kw):
    base = dict(n_train=100, n_dev=40, n_test=40, noise=0.0, seed=0)
    base.update(kw)
    return SynthSpec(**base)


class TestApportion:
    def test_sums_to_n(self):
        assert sum(apportion(97, [0.4, 0.1, 0.2, 0.2, 0.1])) == 97

    def test_exact_when_divisible(self):
        assert apportion(100, [0.4, 0.1, 0.2, 0.2, 0.1]) == [40, 10, 20, 20, 10]

    def test_each_count_within_one_of_exact_share(self):
        probs = [0.37, 0.21, 0.19, 0.23]
        for n in range(0, 60):
            counts = apportion(n, probs)
            assert sum(counts) == n
            for c, p in zip(counts, probs):
                assert abs(c - n * p) < 1.0

    def test_remainder_tie_goes_to_lower_index(self):
        # both entries have remainder 0.5; the single leftover unit
        # must land on index 0
        assert apportion(1, [0.5, 0.5]) == [1, 0]
        assert apportion(3, [0.5, 0.5]) == [2, 1]

    def test_unnormalized_probs_accepted(self):
        assert apportion(10, [4, 1, 2, 2, 1]) == apportion(10, [0.4, 0.1, 0.2, 0.2, 0.1])

    def test_zero_n(self):
        assert apportion(0, [0.3, 0.7]) == [0, 0]

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            apportion(-1, [1.0])
        with pytest.raises(ValueError):
            apportion(5, [0.0, 0.0])

    @settings(max_examples=200, deadline=None)
    @given(
        n=st.integers(0, 500),
        weights=st.lists(st.integers(0, 20), min_size=1, max_size=8).filter(
            lambda w: sum(w) > 0
        ),
    )
    def test_property_sum_and_bounds(self, n, weights):
        counts = apportion(n, weights)
        total = sum(weights)
        assert sum(counts) == n
        assert all(c >= 0 for c in counts)
        for c, w in zip(counts, weights):
            assert abs(c - n * w / total) < 1.0


class TestRenderImage:
    def test_quadrant_values_noiseless(self):
        img = render_image(concept_id=3, concept_bit=1, noise=0.0, seed=0)
        px = img.pixels
        assert np.all(px[:4, :4] == 0.85)  # bit panel bright
        assert np.all(px[:4, 4:] == 0.1)  # no marker
        assert np.all(px[4:, :4] == 0.5)  # constant quadrant
        assert np.all((px[4:, 4:] >= 0.3) & (px[4:, 4:] <= 0.7))

    def test_marker_panel(self):
        img = render_image(0, 0, 0.0, seed=0, marker=True)
        assert np.all(img.pixels[:4, 4:] == 0.9)
        assert np.all(img.pixels[:4, :4] == 0.15)

    def test_distinct_concepts_distinct_textures(self):
        a = render_image(0, 0, 0.0, seed=0)
        b = render_image(1, 0, 0.0, seed=0)
        assert not np.array_equal(a.pixels[4:, 4:], b.pixels[4:, 4:])

    def test_noise_stays_in_unit_interval(self):
        img = render_image(0, 1, noise=0.3, seed=9)
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0

    def test_bit_recoverable_under_noise(self):
        for bit in (0, 1):
            for seed in range(25):
                img = render_image(2, bit, noise=0.3, seed=seed)
                assert recover_concept_bit(img.pixels) == bit

    def test_invalid_bit(self):
        with pytest.raises(ValueError):
            render_image(0, 2, 0.0, seed=0)


def _text_bit(text: str, sp: SynthSpec) -> int:
    words = set(text.split())
    pos = {f"p{j}" for j in range(sp.n_concepts)}
    neg = {f"q{j}" for j in range(sp.n_concepts)}
    has_pos, has_neg = bool(words & pos), bool(words & neg)
    assert has_pos != has_neg, "exactly one concept word per caption"
    return 1 if has_pos else 0


def _image_marker(pixels: np.ndarray) -> bool:
    half_h, half_w = pixels.shape[0] // 2, pixels.shape[1] // 2
    return bool(np.mean(pixels[:half_h, half_w:]) > 0.5)


class TestLabelSemantics:
    def test_label_is_marker_or_bit_mismatch(self):
        # hateful iff a unimodal marker is present in either modality,
        # or the image bit and text bit disagree
        sp = spec(n_train=300, n_dev=0, n_test=0)
        corpus = generate_corpus(sp)
        for rec in corpus.train:
            image = corpus.images[rec.id]
            img_bit = recover_concept_bit(image.pixels)
            txt_bit = _text_bit(rec.text, sp)
            marker = MARKER_WORD in rec.text.split() or _image_marker(image.pixels)
            expected = 1 if (marker or img_bit != txt_bit) else 0
            assert rec.label == expected, rec

    def test_category_to_label_map(self):
        corpus = generate_corpus(spec(n_train=200, n_dev=0, n_test=0))
        for rec in corpus.train:
            if rec.category in ("multimodal_hate", "unimodal_hate"):
                assert rec.label == 1
            else:
                assert rec.label == 0

    def test_unimodal_marker_in_exactly_one_modality(self):
        corpus = generate_corpus(spec(n_train=400, n_dev=0, n_test=0))
        seen_modalities = set()
        for rec in corpus.train:
            in_text = MARKER_WORD in rec.text.split()
            in_image = _image_marker(corpus.images[rec.id].pixels)
            if rec.category == "unimodal_hate":
                assert in_text != in_image
                seen_modalities.add("text" if in_text else "image")
            else:
                assert not in_text and not in_image
        assert seen_modalities == {"text", "image"}

    def test_confounders_agree_across_modalities(self):
        corpus = generate_corpus(spec(n_train=400, n_dev=0, n_test=0))
        for rec in corpus.train:
            if rec.category.startswith("benign") or rec.category == "random_nonhateful":
                img_bit = recover_concept_bit(corpus.images[rec.id].pixels)
                assert img_bit == _text_bit(rec.text, spec())


class TestCorpusShape:
    def test_split_sizes_and_sequential_ids(self):
        corpus = generate_corpus(spec(n_train=103, n_dev=41, n_test=37), id_start=500)
        assert len(corpus.train) == 103
        assert len(corpus.dev) == 41
        assert len(corpus.test) == 37
        all_ids = [r.id for s in (corpus.train, corpus.dev, corpus.test) for r in s]
        assert sorted(all_ids) == list(range(500, 500 + 181))
        assert set(corpus.images) == set(all_ids)

    def test_train_category_mix_matches_apportionment(self):
        corpus = generate_corpus(spec(n_train=97, n_dev=0, n_test=0))
        want = apportion(97, list(spec().mix))
        got = [sum(1 for r in corpus.train if r.category == c) for c in CATEGORIES]
        assert got == want

    def test_dev_test_label_balance(self):
        # default mix puts exactly half the mass on hateful categories,
        # so balanced splits come out 50/50 even at odd-ish sizes
        corpus = generate_corpus(spec(n_train=0, n_dev=50, n_test=402))
        for split in (corpus.dev, corpus.test):
            n_pos = sum(r.label for r in split)
            assert n_pos * 2 == len(split)

    def test_emission_order_is_shuffled(self):
        corpus = generate_corpus(spec(n_train=100, n_dev=0, n_test=0))
        cats = [r.category for r in corpus.train]
        grouped = sorted(cats, key=CATEGORIES.index)
        assert cats != grouped  # category blocks would skew prefix slices

    def test_prefix_slice_is_roughly_balanced(self):
        corpus = generate_corpus(spec(n_train=400, n_dev=0, n_test=0))
        head = list(corpus.train)[:100]
        n_pos = sum(r.label for r in head)
        assert 30 <= n_pos <= 70

    def test_deterministic_across_runs(self):
        a = generate_corpus(spec(seed=11))
        b = generate_corpus(spec(seed=11))
        assert a.train.records == b.train.records
        assert a.dev.records == b.dev.records
        assert a.test.records == b.test.records
        for i in a.images:
            assert np.array_equal(a.images[i].pixels, b.images[i].pixels)

    def test_seed_changes_content(self):
        a = generate_corpus(spec(seed=1))
        b = generate_corpus(spec(seed=2))
        assert [r.text for r in a.train] != [r.text for r in b.train]

    def test_source_tags_by_split(self):
        corpus = generate_corpus(spec(n_train=10, n_dev=10, n_test=10))
        assert {r.source for r in corpus.train} == {"hm_train"}
        assert {r.source for r in corpus.dev} == {"hm_dev_seen"}
        assert {r.source for r in corpus.test} == {"hm_test_unseen"}


class TestVocabularyWords:
    def test_contains_concepts_fillers_marker(self):
        words = vocabulary_words(spec())
        sp = spec()
        assert MARKER_WORD in words
        for j in range(sp.n_concepts):
            assert f"p{j}" in words and f"q{j}" in words

    def test_covers_generated_text(self):
        sp = spec(n_train=200, n_dev=0, n_test=0)
        allowed = set(vocabulary_words(sp))
        corpus = generate_corpus(sp)
        for rec in corpus.train:
            assert set(rec.text.split()) <= allowed


class TestImageFiles:
    def test_roundtrip_exact_at_f4(self, tmp_path):
        img = render_image(1, 1, noise=0.2, seed=3)
        path = tmp_path / "img" / "0000001.bin"
        write_image(path, img)
        back = read_image(path)
        assert back.pixels.shape == img.pixels.shape
        assert np.array_equal(back.pixels, img.pixels.astype("<f4").astype(np.float64))

    def test_header_is_height_then_width(self, tmp_path):
        img = render_image(0, 0, 0.0, seed=0, size=(6, 10))
        path = tmp_path / "a.bin"
        write_image(path, img)
        raw = path.read_bytes()
        assert int.from_bytes(raw[0:4], "little") == 6
        assert int.from_bytes(raw[4:8], "little") == 10
        assert len(raw) == 8 + 4 * 60

    def test_truncated_file_rejected(self, tmp_path):
        img = render_image(0, 0, 0.0, seed=0)
        path = tmp_path / "a.bin"
        write_image(path, img)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError):
            read_image(path)

    def test_short_file_rejected(self, tmp_path):
        path = tmp_path / "a.bin"
        path.write_bytes(b"\x01\x02")
        with pytest.raises(ValueError):
            read_image(path)


class TestWriteCorpus:
    def test_materialized_corpus_reingests(self, tmp_path):
        corpus = generate_corpus(spec(n_train=20, n_dev=8, n_test=8))
        write_corpus(corpus, tmp_path)
        for split in ("train", "dev", "test"):
            report = ingest_metadata(tmp_path / f"{split}.jsonl")
            assert not report.malformed
            original = getattr(corpus, split)
            assert report.records.records == original.records
            for rec in report.records:
                back = read_image(tmp_path / rec.img)
                assert np.array_equal(
                    back.pixels,
                    corpus.images[rec.id].pixels.astype("<f4").astype(np.float64),
                )

import pytest

from app.core.errors import ConfigError, DataError, FormatError, FramingError, LayoutError
from slm.config import HeadMode, QAFormat, SpeakerMode
from slm.tokens import (
    IGNORE_INDEX,
    FrameLayout,
    SegmentTag,
    SliceVocab,
    Task,
    TaskParts,
    Vocabulary,
    assemble_context,
    deinterleave,
    group_stream,
    interleave_cwi,
    interleave_fwi,
    pack_groups,
    split_generated_group,
    unpack_groups,
)
from slm.tokens.stream_io import parse_stream, read_streams, write_streams

# special 0–6, prosody 7–70, content 71–198
SPEECH_ONLY = Vocabulary.build(charset="", prosody_size=64, content_size=128)
LAYOUT = FrameLayout(SPEECH_ONLY)
FRAMES = [[7, 130, 145], [9, 131, 146]]

# special 0–6, text 7–8 ("ab"), prosody 9–72, content 73–200, speaker 201–205
FULL = Vocabulary.build(charset="ab", prosody_size=64, content_size=128, speakers=4)
FULL_LAYOUT = FrameLayout(FULL)
FRAME = [[9, 73, 73]]


class TestInterleave:
    def test_fwi_orders_frame_by_frame(self):
        assert interleave_fwi(FRAMES, LAYOUT) == [7, 130, 145, 9, 131, 146]
        assert interleave_fwi([], LAYOUT) == []
        assert interleave_fwi(FRAMES[:1], LAYOUT) == [7, 130, 145]

    def test_cwi_groups_slots_inside_chunk(self):
        assert interleave_cwi(FRAMES, LAYOUT, chunk_len=2) == [7, 9, 130, 131, 145, 146]
        assert interleave_cwi(FRAMES, LAYOUT, chunk_len=1) == interleave_fwi(FRAMES, LAYOUT)

    def test_cwi_short_final_chunk(self):
        frames = FRAMES + [[10, 132, 147]]
        assert interleave_cwi(frames, LAYOUT, chunk_len=2) == [
            7, 9, 130, 131, 145, 146, 10, 132, 147
        ]

    def test_cwi_rejects_zero_chunk(self):
        with pytest.raises(ConfigError):
            interleave_cwi(FRAMES, LAYOUT, chunk_len=0)

    def test_wrong_segment_reports_position(self):
        with pytest.raises(LayoutError) as e:
            interleave_fwi([[7, 130, 145], [9, 8, 146]], LAYOUT)
        assert e.value.position == 4

    @pytest.mark.parametrize(
        "tokens,scheme,chunk",
        [
            ([7, 130, 145, 9, 131, 146], "fwi", 80),
            ([7, 9, 130, 131, 145, 146], "cwi", 2),
        ],
    )
    def test_deinterleave_inverts(self, tokens, scheme, chunk):
        assert deinterleave(tokens, LAYOUT, scheme, chunk) == FRAMES

    def test_deinterleave_framing_error(self):
        with pytest.raises(FramingError):
            deinterleave([7, 130], LAYOUT)

    def test_deinterleave_layout_error(self):
        with pytest.raises(LayoutError) as e:
            deinterleave([130, 7, 145], LAYOUT)
        assert e.value.position == 0

    def test_round_trip_both_schemes(self):
        frames = [[7 + i % 64, 71 + i % 128, 71 + (3 * i) % 128] for i in range(200)]
        for chunk in (1, 7, 80):
            tokens = interleave_cwi(frames, LAYOUT, chunk)
            assert deinterleave(tokens, LAYOUT, "cwi", chunk) == frames
        assert deinterleave(interleave_fwi(frames, LAYOUT), LAYOUT, "fwi") == frames


class TestGroups:
    def test_pack_exact_partitions(self):
        tokens = interleave_fwi(FRAMES, LAYOUT)
        assert [g.member_ids for g in pack_groups(tokens, 3, LAYOUT)] == [
            (7, 130, 145),
            (9, 131, 146),
        ]
        assert len(pack_groups(tokens, 6, LAYOUT)) == 1

    def test_last_group_is_padded(self):
        tokens = interleave_fwi(FRAMES + [[10, 132, 147]], LAYOUT)
        groups = pack_groups(tokens, 6, LAYOUT)
        assert len(groups) == 2
        assert groups[1].member_ids[3:] == (SPEECH_ONLY.pad,) * 3
        assert unpack_groups(groups, LAYOUT) == tokens

    def test_group_size_must_cover_frames(self):
        with pytest.raises(ConfigError):
            pack_groups(interleave_fwi(FRAMES, LAYOUT), 4, LAYOUT)

    def test_partial_frame_is_rejected(self):
        with pytest.raises(FramingError):
            pack_groups([7, 130, 145, 9], 3, LAYOUT)

    def test_group_roles_follow_slots(self):
        (group,) = pack_groups(interleave_fwi(FRAMES, LAYOUT), 6, LAYOUT)
        assert [str(r) for r in group.slot_roles] == ["prosody", "content", "content"] * 2

    def test_split_generated_group_stops_at_frame_eos(self):
        eos, pad = SPEECH_ONLY.eos_speech, SPEECH_ONLY.pad
        assert split_generated_group([7, 130, 145, eos, pad, pad], eos, 3) == (
            [7, 130, 145],
            True,
        )
        # EOS внутри кадра не завершает отрезок
        assert split_generated_group([7, eos, 145], eos, 3) == ([7, eos, 145], False)


class TestContext:
    def test_tts_layout_and_mask(self):
        stream = assemble_context(
            Task.TTS, TaskParts(text="ab", frames=FRAME, speaker_id=3), FULL, FULL_LAYOUT
        )
        assert stream.tokens == [FULL.mark_spk, FULL.spk_slot, 7, 8, FULL.eos_text, 9, 73, 73,
                                 FULL.eos_speech]
        assert stream.loss_mask == [False] * 5 + [True] * 4
        assert stream.segment_tags[1] is SegmentTag.SPEAKER

    def test_speaker_token_mode(self):
        stream = assemble_context(
            Task.TTS,
            TaskParts(text="ab", frames=FRAME, speaker_id=3),
            FULL,
            FULL_LAYOUT,
            speaker_mode=SpeakerMode.TOKEN,
        )
        assert stream.tokens[1] == FULL.speaker_token(3) == 205

    def test_speaker_off_has_no_prefix(self):
        stream = assemble_context(
            Task.TTS,
            TaskParts(text="ab", frames=FRAME),
            FULL,
            FULL_LAYOUT,
            speaker_mode=SpeakerMode.OFF,
        )
        assert stream.tokens[0] == 7

    def test_asr_layout_and_mask(self):
        stream = assemble_context(
            Task.ASR, TaskParts(text="ab", frames=FRAME), FULL, FULL_LAYOUT
        )
        assert stream.tokens == [9, 73, 73, FULL.eos_speech, 7, 8, FULL.eos_text]
        assert stream.loss_mask == [False] * 4 + [True] * 3

    def test_role_qa_marks_and_mask(self):
        parts = TaskParts(
            speaker_id=1, question="ab", answer="ba", answer_frames=FRAME
        )
        stream = assemble_context(Task.ROLE_QA, parts, FULL, FULL_LAYOUT)
        ta = stream.tokens.index(FULL.mark_ta)
        ua = stream.tokens.index(FULL.mark_ua)
        assert stream.tokens[ta + 1 : ua] == [8, 7, FULL.eos_text]
        assert stream.loss_mask[ta + 1 : ua] == [True] * 3
        assert stream.loss_mask[ua + 1 :] == [True] * 4
        assert not any(stream.loss_mask[: ta + 1])

    def test_role_qa_speech_only_format(self):
        parts = TaskParts(speaker_id=1, question="ab", answer="ba", answer_frames=FRAME)
        stream = assemble_context(
            Task.ROLE_QA, parts, FULL, FULL_LAYOUT, qa_format=QAFormat.TQ_SA
        )
        assert FULL.mark_ta not in stream.tokens
        assert FULL.mark_ua in stream.tokens

    def test_missing_part_is_format_error(self):
        with pytest.raises(FormatError):
            assemble_context(
                Task.ROLE_QA,
                TaskParts(speaker_id=1, question="", answer="a", answer_frames=FRAME),
                FULL,
                FULL_LAYOUT,
            )
        with pytest.raises(FormatError):
            assemble_context(Task.TTS, TaskParts(text="ab", frames=[], speaker_id=0), FULL,
                             FULL_LAYOUT)

    def test_segment_soundness(self):
        parts = TaskParts(speaker_id=2, question="ab", answer="ab", answer_frames=FRAME * 2)
        stream = assemble_context(Task.ROLE_QA, parts, FULL, FULL_LAYOUT)
        expected = {
            SegmentTag.TEXT_Q: "text",
            SegmentTag.TEXT_A: "text",
            SegmentTag.SPEAKER: "speaker",
            SegmentTag.SPECIAL: "special",
        }
        for token, tag in zip(stream.tokens, stream.segment_tags, strict=True):
            if tag.is_speech:
                assert FULL.segment_of(token) in ("prosody", "content")
            else:
                assert FULL.segment_of(token) == expected[tag]


class TestGrouping:
    def _tts(self, frames):
        return assemble_context(
            Task.TTS, TaskParts(text="ab", frames=frames, speaker_id=0), FULL, FULL_LAYOUT
        )

    def test_full_last_group_gets_terminal_eos_group(self):
        grouped = group_stream(self._tts(FRAME), 3, FULL_LAYOUT)
        assert grouped.units[-2].ids == (9, 73, 73)
        assert grouped.units[-1].ids == (FULL.eos_speech, FULL.pad, FULL.pad)
        assert len(grouped) == 7

    def test_eos_fills_first_pad_of_last_group(self):
        grouped = group_stream(self._tts(FRAME), 6, FULL_LAYOUT)
        assert grouped.units[-1].ids == (9, 73, 73, FULL.eos_speech, FULL.pad, FULL.pad)
        assert len(grouped) == 6

    def test_g1_keeps_token_positions(self):
        stream = self._tts(FRAME)
        assert len(group_stream(stream, 1, FULL_LAYOUT)) == len(stream)

    def test_targets_use_slice_local_ids(self):
        slices = SliceVocab(FULL_LAYOUT, HeadMode.DECOUPLED, 3)
        grouped = group_stream(self._tts(FRAME), 3, FULL_LAYOUT)
        text_targets, speech_targets = grouped.targets(slices)
        assert all(t == IGNORE_INDEX for t in text_targets)
        assert speech_targets[4] == [0, 0, 0]
        assert speech_targets[5] == [64, IGNORE_INDEX, IGNORE_INDEX]
        assert grouped.prediction_count(slices) == 2


class TestSliceVocab:
    def test_decoupled_groups_have_slot_slices(self):
        slices = SliceVocab(FULL_LAYOUT, HeadMode.DECOUPLED, 3)
        assert [slices.slice_size(k) for k in range(slices.n_slices)] == [65, 128, 128]

    def test_decoupled_ntp_switches_by_phase(self):
        slices = SliceVocab(FULL_LAYOUT, HeadMode.DECOUPLED, 1)
        assert slices.n_slices == 2
        assert [slices.slice_for_slot(s) for s in range(6)] == [0, 1, 1, 0, 1, 1]

    def test_coupled_ntp_is_flat(self):
        slices = SliceVocab(FULL_LAYOUT, HeadMode.COUPLED, 1)
        assert slices.n_slices == 1
        assert slices.slice_size(0) == 64 + 128 + 1
        assert slices.to_global(0, 192) == FULL.eos_speech
        assert slices.to_local(0, 73) == 64


class TestStreamIO:
    def test_files_round_trip(self, tmp_path):
        streams = [
            assemble_context(Task.ASR, TaskParts(text="ab", frames=FRAME), FULL, FULL_LAYOUT),
            assemble_context(
                Task.TTS, TaskParts(text="ba", frames=FRAME, speaker_id=1), FULL, FULL_LAYOUT
            ),
        ]
        path = tmp_path / "streams.txt"
        assert write_streams(path, streams) == 2
        loaded = read_streams(path)
        assert [s.tokens for s in loaded] == [s.tokens for s in streams]
        assert [s.loss_mask for s in loaded] == [s.loss_mask for s in streams]
        assert [s.segment_tags for s in loaded] == [s.segment_tags for s in streams]

    def test_unknown_tag(self):
        with pytest.raises(DataError):
            parse_stream("1 2", "x z")

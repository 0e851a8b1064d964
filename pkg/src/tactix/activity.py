"""Learning activity state machine: task checklist and the gated quiz.

The quiz accepts an answer only when both robots stand on the same zone and
both participants have voted for that zone on that question.  Rejections are
returned (never raised) so the session loop can report them to clients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .zonemap import ZoneMap

DEFAULT_ACTIVITY_RESOURCE = "cell_activity.json"

REJECT_NOT_COLOCATED = "not_colocated"
REJECT_AWAITING_PARTNER = "awaiting_partner"
REJECT_ALREADY_ANSWERED = "already_answered"


class ActivityError(ValueError):
    """Malformed activity file or invalid state-machine input."""


@dataclass
class TaskItem:
    task_id: str
    text: str
    authored: bool = False
    done_by: tuple[str, int] | None = None  # (participant, t_ms), set once


@dataclass(frozen=True)
class QuizQuestion:
    q_id: str
    text: str
    answer_zone_id: str


@dataclass
class QuestionState:
    proposals: dict[str, str] = field(default_factory=dict)   # participant -> zone
    agreement: str | None = None
    result: dict | None = None  # {"correct": bool, "t_ms": int}


@dataclass(frozen=True)
class SubmitOutcome:
    accepted: bool
    reason: str | None
    correct: bool | None


@dataclass(frozen=True)
class Activity:
    tasks: tuple[TaskItem, ...]
    questions: tuple[QuizQuestion, ...]

    def question(self, q_id: str) -> QuizQuestion:
        for q in self.questions:
            if q.q_id == q_id:
                return q
        raise ActivityError(f"unknown question id: {q_id!r}")

    def answer_key(self) -> dict[str, str]:
        return {q.q_id: q.answer_zone_id for q in self.questions}


def load_activity(document: bytes | str) -> Activity:
    """Parse an activity file (UTF-8 JSON with tasks and questions)."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ActivityError(f"malformed activity JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ActivityError("activity document must be a JSON object")
    try:
        tasks = tuple(
            TaskItem(task_id=t["id"], text=t["text"], authored=bool(t.get("authored", False)))
            for t in raw["tasks"]
        )
        questions = tuple(
            QuizQuestion(q_id=q["id"], text=q["text"], answer_zone_id=q["answer_zone_id"])
            for q in raw["questions"]
        )
    except (KeyError, TypeError) as exc:
        raise ActivityError(f"missing activity field: {exc}") from None
    ids = [t.task_id for t in tasks] + [q.q_id for q in questions]
    if len(set(ids)) != len(ids):
        raise ActivityError("duplicate task/question ids")
    return Activity(tasks=tasks, questions=questions)


def load_activity_file(path: str | Path) -> Activity:
    return load_activity(Path(path).read_bytes())


def default_activity_bytes() -> bytes:
    return resources.files("tactix.data").joinpath(DEFAULT_ACTIVITY_RESOURCE).read_bytes()


def load_default_activity() -> Activity:
    return load_activity(default_activity_bytes())


def validate_activity_against_map(activity: Activity, zone_map: ZoneMap) -> list[str]:
    """Cross-reference check; returns a list of problems (empty when clean)."""
    problems = []
    known = {z.id for z in zone_map.zones}
    for q in activity.questions:
        if q.answer_zone_id not in known:
            problems.append(f"question {q.q_id!r}: unknown answer zone {q.answer_zone_id!r}")
    return problems


class ActivityEngine:
    """Mutable session-side activity state; mutated only on the session loop."""

    def __init__(self, activity: Activity, zone_map: ZoneMap) -> None:
        self.activity = activity
        self.zone_map = zone_map
        self.tasks: dict[str, TaskItem] = {
            t.task_id: TaskItem(t.task_id, t.text, t.authored) for t in activity.tasks
        }
        self.task_order = tuple(t.task_id for t in activity.tasks)
        self.questions: dict[str, QuestionState] = {
            q.q_id: QuestionState() for q in activity.questions
        }
        self.question_order = tuple(q.q_id for q in activity.questions)
        self.current_q_id: str | None = None
        self.quiz_started_t_ms: int | None = None
        self.quiz_finished_t_ms: int | None = None

    # -- exploratory tasks ---------------------------------------------------

    def tick_task(self, task_id: str, participant: str, t_ms: int) -> TaskItem:
        """Mark a task done by its first ticker; repeats are no-ops."""
        task = self.tasks.get(task_id)
        if task is None:
            raise ActivityError(f"unknown task id: {task_id!r}")
        if task.done_by is None:
            task.done_by = (participant, t_ms)
        return task

    # -- quiz ------------------------------------------------------------------

    def note_quiz_activity(self, t_ms: int) -> None:
        if self.quiz_started_t_ms is None:
            self.quiz_started_t_ms = t_ms

    def navigate(self, q_id: str, t_ms: int) -> None:
        if q_id not in self.questions:
            raise ActivityError(f"unknown question id: {q_id!r}")
        self.note_quiz_activity(t_ms)
        self.current_q_id = q_id

    def propose_answer(self, q_id: str, participant: str, zone_id: str) -> dict[str, str]:
        """Record (or overwrite) a participant's live proposal for a question."""
        state = self.questions.get(q_id)
        if state is None:
            raise ActivityError(f"unknown question id: {q_id!r}")
        if state.result is not None:
            raise ActivityError(f"question {q_id!r} already answered")
        self.zone_map.zone(zone_id)  # raises KeyError on unknown zone
        state.proposals[participant] = zone_id
        return dict(state.proposals)

    def try_submit(
        self,
        q_id: str,
        live_zone_a: str | None,
        live_zone_b: str | None,
        votes: dict[str, str],
        t_ms: int,
    ) -> SubmitOutcome:
        """Evaluate the agreement gate for one question.

        Accepts only when both live zones equal one zone Z, both votes name
        (q_id, Z) and the question is unanswered; grades on acceptance.
        Rejections come back as outcomes, never exceptions.
        """
        state = self.questions.get(q_id)
        if state is None:
            raise ActivityError(f"unknown question id: {q_id!r}")
        if state.result is not None:
            return SubmitOutcome(False, REJECT_ALREADY_ANSWERED, None)
        self.note_quiz_activity(t_ms)
        if len(votes) < 2:
            return SubmitOutcome(False, REJECT_AWAITING_PARTNER, None)
        vote_zones = set(votes.values())
        if (
            len(vote_zones) != 1
            or live_zone_a is None
            or live_zone_b is None
            or live_zone_a != live_zone_b
            or live_zone_a not in vote_zones
        ):
            return SubmitOutcome(False, REJECT_NOT_COLOCATED, None)

        zone = vote_zones.pop()
        correct = zone == self.activity.question(q_id).answer_zone_id
        state.agreement = zone
        state.result = {"correct": correct, "t_ms": t_ms}
        if all(q.result is not None for q in self.questions.values()):
            self.quiz_finished_t_ms = t_ms
        return SubmitOutcome(True, None, correct)

    @property
    def quiz_finished(self) -> bool:
        return self.quiz_finished_t_ms is not None

    def quiz_report(self) -> dict:
        """Score and duration; only valid once every question has a result."""
        if not self.quiz_finished or self.quiz_started_t_ms is None:
            raise ActivityError("quiz not finished")
        score = sum(1 for q in self.questions.values() if q.result and q.result["correct"])
        duration_s = (self.quiz_finished_t_ms - self.quiz_started_t_ms) / 1000.0
        return {"score": score, "out_of": len(self.questions), "duration_s": duration_s}

    def snapshot(self) -> dict:
        """JSON-ready view of the full activity state."""
        return {
            "tasks": [
                {
                    "task_id": t.task_id,
                    "text": t.text,
                    "done_by": None
                    if t.done_by is None
                    else {"participant": t.done_by[0], "t_ms": t.done_by[1]},
                }
                for t in (self.tasks[tid] for tid in self.task_order)
            ],
            "questions": [
                {
                    "q_id": qid,
                    "proposals": dict(self.questions[qid].proposals),
                    "agreement": self.questions[qid].agreement,
                    "result": self.questions[qid].result,
                }
                for qid in self.question_order
            ],
            "current_q_id": self.current_q_id,
            "quiz_started_t_ms": self.quiz_started_t_ms,
            "quiz_finished_t_ms": self.quiz_finished_t_ms,
        }

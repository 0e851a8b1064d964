/** Side-panel DOM: zone info, task checklist, quiz controls, status line. */

import type { SessionState } from "./session.js";
import type { Zone } from "./mapdata.js";

export interface UiHandlers {
  onTick: (taskId: string) => void;
  onNav: (qId: string) => void;
  onAgree: () => void;
}

export class Panel {
  private root: HTMLElement;
  private statusEl: HTMLElement;
  private infoTitle: HTMLElement;
  private infoBody: HTMLElement;
  private taskList: HTMLElement;
  private quizBox: HTMLElement;
  private resultBanner: HTMLElement;

  constructor(root: HTMLElement, private readonly handlers: UiHandlers) {
    this.root = root;
    root.innerHTML = `
      <div class="status" id="status">connecting…</div>
      <div class="info"><h2 id="info-title">—</h2><p id="info-body"></p></div>
      <div class="tasks"><h3>Exploration tasks</h3><ul id="task-list"></ul></div>
      <div class="quiz"><h3>Quiz</h3><div id="quiz-box"></div><div id="result-banner"></div></div>
    `;
    this.statusEl = root.querySelector("#status")!;
    this.infoTitle = root.querySelector("#info-title")!;
    this.infoBody = root.querySelector("#info-body")!;
    this.taskList = root.querySelector("#task-list")!;
    this.quizBox = root.querySelector("#quiz-box")!;
    this.resultBanner = root.querySelector("#result-banner")!;
  }

  setStatus(text: string, bad = false): void {
    this.statusEl.textContent = text;
    this.statusEl.className = bad ? "status bad" : "status";
  }

  showZone(zone: Zone | undefined): void {
    if (!zone) return;
    this.infoTitle.textContent = zone.name;
    this.infoBody.textContent = zone.infoText;
  }

  render(state: SessionState, selfZone: string): void {
    this.taskList.innerHTML = "";
    for (const task of state.tasks.values()) {
      const li = document.createElement("li");
      const btn = document.createElement("button");
      btn.textContent = task.doneBy ? "✓" : "○";
      btn.disabled = task.doneBy !== null;
      btn.onclick = () => this.handlers.onTick(task.taskId);
      li.appendChild(btn);
      const label = document.createElement("span");
      label.textContent = task.text + (task.doneBy ? ` (by ${task.doneBy})` : "");
      if (task.doneBy) label.className = "done";
      li.appendChild(label);
      this.taskList.appendChild(li);
    }

    this.quizBox.innerHTML = "";
    const qId = state.currentQId;
    if (qId === null) {
      const done = document.createElement("p");
      done.textContent = state.quizDone()
        ? `Quiz complete: ${state.score()}/${state.questionOrder.length}`
        : "No question selected.";
      this.quizBox.appendChild(done);
    } else {
      const q = state.questions.get(qId)!;
      const idx = state.questionOrder.indexOf(qId);
      const head = document.createElement("p");
      head.className = "q-text";
      head.textContent = `Q${idx + 1}. ${q.text}`;
      this.quizBox.appendChild(head);

      const nav = document.createElement("div");
      nav.className = "q-nav";
      state.questionOrder.forEach((id, i) => {
        const b = document.createElement("button");
        b.textContent = String(i + 1);
        const answered = state.questions.get(id)!.result !== null;
        b.className = id === qId ? "current" : answered ? "answered" : "";
        b.onclick = () => this.handlers.onNav(id);
        nav.appendChild(b);
      });
      this.quizBox.appendChild(nav);

      const propose = document.createElement("p");
      const mine = q.proposals[state.role ?? ""] ?? "—";
      const theirs = q.proposals[state.peerRole ?? ""] ?? "—";
      propose.textContent = `Your robot proposes: ${selfZone}. Recorded: you ${mine}, partner ${theirs}.`;
      this.quizBox.appendChild(propose);

      const agree = document.createElement("button");
      agree.id = "agree-btn";
      agree.textContent = "Agree & submit vote";
      agree.disabled = !state.agreeEnabled(selfZone);
      agree.onclick = () => this.handlers.onAgree();
      this.quizBox.appendChild(agree);
      if (agree.disabled && q.result === null) {
        const hint = document.createElement("p");
        hint.className = "hint";
        hint.textContent = "Move both robots onto the same zone to enable voting.";
        this.quizBox.appendChild(hint);
      }
    }

    const res = state.lastResult;
    if (res) {
      if (res.accepted) {
        this.resultBanner.className = res.correct ? "banner good" : "banner warn";
        this.resultBanner.textContent = `${res.qId}: accepted — ${res.correct ? "correct!" : "incorrect."}`;
      } else {
        this.resultBanner.className = "banner bad";
        const hints: Record<string, string> = {
          not_colocated: "move together onto the answer first",
          awaiting_partner: "waiting for your partner's vote",
          already_answered: "this question is already answered",
        };
        this.resultBanner.textContent = `${res.qId}: rejected (${res.reason}) — ${hints[res.reason ?? ""] ?? ""}`;
      }
    }
  }
}

/**
 * DOM controller for the follow-up viewer.
 *
 * The physician picks a patient, a target diagnosis and source diagnoses,
 * chooses the estimator, and steers the blend alpha live. Registration
 * runs once per (pair, method) — the client cache guarantees it — while
 * alpha and overlay changes only re-request the blended image, debounced
 * so a slider sweep stays bounded. The full view state lives in the URL.
 */

import { ApiClient, ApiError, PatientSummary, RegistrationReport } from "./api.js";
import { debounce, Debounced } from "./debounce.js";
import {
  Method,
  ViewerState,
  normalize,
  radiansToDisplayDegrees,
  stateFromQuery,
  stateToQuery,
} from "./state.js";

export const BLEND_DEBOUNCE_MS = 100;

export class ViewerApp {
  state: ViewerState;
  patients: PatientSummary[] = [];
  readonly reports = new Map<string, RegistrationReport>();
  private readonly requestBlend: Debounced<[]>;
  private blendUrl: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly win: Window,
    debounceMs: number = BLEND_DEBOUNCE_MS,
  ) {
    this.state = stateFromQuery(win.location.search);
    this.requestBlend = debounce(() => void this.refreshBlend(), debounceMs);
    this.renderSkeleton();
  }

  async init(): Promise<void> {
    try {
      this.patients = await this.client.listPatients();
      this.clearBanner();
    } catch (err) {
      this.showBanner(`Service unreachable: ${describe(err)}`, () => void this.init());
      return;
    }
    this.renderPatientOptions();
    this.renderExamList();
    if (this.selectionComplete()) {
      await this.runRegistration();
    }
  }

  // ----------------------------------------------------------- state flow

  private selectionComplete(): boolean {
    return !!this.state.patient && !!this.state.target && this.state.sources.length > 0;
  }

  private update(partial: Partial<ViewerState>): void {
    this.state = normalize({ ...this.state, ...partial });
    this.syncUrl();
  }

  private syncUrl(): void {
    this.win.history.replaceState(null, "", "?" + stateToQuery(this.state));
  }

  /** POST /register for every selected pair (cached), then refresh the blend. */
  async runRegistration(): Promise<void> {
    if (!this.selectionComplete()) return;
    const { patient, target, method } = this.state;
    this.reports.clear();
    try {
      for (const source of this.state.sources) {
        const report = await this.client.register(patient!, source, target!, method);
        this.reports.set(source, report);
      }
      this.clearBanner();
    } catch (err) {
      this.showBanner(`Registration failed: ${describe(err)}`, () => void this.runRegistration());
      this.renderReports();
      return;
    }
    this.renderReports();
    await this.refreshBlend();
  }

  /** GET /blend with the current alpha; never triggers registration. */
  async refreshBlend(): Promise<void> {
    if (!this.selectionComplete()) return;
    const img = this.el<HTMLImageElement>("blend-image");
    try {
      const blob = await this.client.fetchBlend(this.state);
      if (this.blendUrl) URL.revokeObjectURL(this.blendUrl);
      this.blendUrl = URL.createObjectURL(blob);
      img.src = this.blendUrl;
      this.clearBanner();
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.showBanner(`Blend failed: ${describe(err)}`, () => void this.refreshBlend());
    }
  }

  // ------------------------------------------------------------ rendering

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <div class="banner" data-testid="banner" hidden>
        <span data-testid="banner-text"></span>
        <button type="button" data-testid="banner-retry">Retry</button>
      </div>
      <div class="layout">
        <aside class="controls">
          <label>Patient
            <select data-testid="patient-select"></select>
          </label>
          <div class="exams" data-testid="exam-list"></div>
          <fieldset class="method" data-testid="method-toggle">
            <legend>Estimator</legend>
            <label><input type="radio" name="method" value="angle"> angle</label>
            <label><input type="radio" name="method" value="lsq"> least squares</label>
          </fieldset>
          <label class="overlay">
            <input type="checkbox" data-testid="overlay-toggle"> landmark overlay
          </label>
          <label class="alpha">Blend
            <input type="range" min="0" max="1" step="0.01" data-testid="alpha-slider">
            <output data-testid="alpha-value"></output>
          </label>
        </aside>
        <main>
          <div class="reports" data-testid="report-panel"></div>
          <img class="blend" alt="registered blend" data-testid="blend-image">
        </main>
      </div>`;

    this.el<HTMLSelectElement>("patient-select").addEventListener("change", (ev) => {
      const value = (ev.target as HTMLSelectElement).value || null;
      this.update({ patient: value, target: null, sources: [] });
      this.reports.clear();
      this.renderExamList();
      this.renderReports();
    });
    this.el<HTMLElement>("method-toggle").addEventListener("change", (ev) => {
      this.update({ method: (ev.target as HTMLInputElement).value as Method });
      void this.runRegistration();
    });
    this.el<HTMLInputElement>("overlay-toggle").addEventListener("change", (ev) => {
      this.update({ overlay: (ev.target as HTMLInputElement).checked ? "landmarks" : "none" });
      this.requestBlend();
    });
    const slider = this.el<HTMLInputElement>("alpha-slider");
    slider.addEventListener("input", () => {
      this.update({ alpha: Number(slider.value) });
      this.el<HTMLOutputElement>("alpha-value").value = this.state.alpha.toFixed(2);
      this.requestBlend();
    });
    this.reflectStateIntoControls();
  }

  private reflectStateIntoControls(): void {
    this.el<HTMLInputElement>("alpha-slider").value = this.state.alpha.toString();
    this.el<HTMLOutputElement>("alpha-value").value = this.state.alpha.toFixed(2);
    this.el<HTMLInputElement>("overlay-toggle").checked = this.state.overlay === "landmarks";
    const radios = this.el<HTMLElement>("method-toggle").querySelectorAll("input");
    radios.forEach((r) => ((r as HTMLInputElement).checked = (r as HTMLInputElement).value === this.state.method));
  }

  private renderPatientOptions(): void {
    const select = this.el<HTMLSelectElement>("patient-select");
    select.innerHTML =
      `<option value="">— choose —</option>` +
      this.patients
        .map((p) => `<option value="${p.patient_id}">${p.patient_id} (${p.exams.length} exams)</option>`)
        .join("");
    select.value = this.state.patient ?? "";
    if (this.patients.length === 0) {
      this.el<HTMLElement>("exam-list").textContent = "The store holds no patients yet.";
    }
  }

  private renderExamList(): void {
    const container = this.el<HTMLElement>("exam-list");
    const patient = this.patients.find((p) => p.patient_id === this.state.patient);
    if (!patient) {
      if (this.patients.length > 0) container.textContent = "Select a patient.";
      return;
    }
    const groups = new Map<string, typeof patient.exams>();
    for (const exam of patient.exams) {
      const list = groups.get(exam.modality) ?? [];
      list.push(exam);
      groups.set(exam.modality, list);
    }
    container.innerHTML = [...groups.entries()]
      .map(
        ([modality, exams]) => `
        <section class="modality">
          <h3>${modality}</h3>
          ${exams
            .map(
              (e) => `
            <div class="exam-row" data-exam="${e.exam_id}">
              <span class="exam-label">${e.exam_id} · ${e.date}</span>
              <label><input type="radio" name="target" value="${e.exam_id}"
                ${this.state.target === e.exam_id ? "checked" : ""}> target</label>
              <label><input type="checkbox" name="source" value="${e.exam_id}"
                ${this.state.sources.includes(e.exam_id) ? "checked" : ""}> source</label>
            </div>`,
            )
            .join("")}
        </section>`,
      )
      .join("");
    container.querySelectorAll<HTMLInputElement>("input[name=target]").forEach((input) =>
      input.addEventListener("change", () => {
        this.update({ target: input.value });
        this.renderExamList();
        void this.runRegistration();
      }),
    );
    container.querySelectorAll<HTMLInputElement>("input[name=source]").forEach((input) =>
      input.addEventListener("change", () => {
        const checked = [
          ...container.querySelectorAll<HTMLInputElement>("input[name=source]:checked"),
        ].map((i) => i.value);
        this.update({ sources: checked }); // DOM order == chronological order
        this.renderExamList();
        void this.runRegistration();
      }),
    );
  }

  private renderReports(): void {
    const panel = this.el<HTMLElement>("report-panel");
    if (this.reports.size === 0) {
      panel.innerHTML = "";
      return;
    }
    panel.innerHTML = [...this.reports.entries()]
      .map(([source, r]) => {
        const angle = radiansToDisplayDegrees(r.transform.angle);
        const resL = radiansToDisplayDegrees(r.residual_left);
        const resR = radiansToDisplayDegrees(r.residual_right);
        return `
          <article class="report" data-testid="report-${source}">
            <h4>${source} → ${this.state.target}</h4>
            <dl>
              <dt>scale</dt><dd data-field="scale">${r.transform.scale.toFixed(4)}</dd>
              <dt>rotation</dt><dd data-field="angle">${angle}°</dd>
              <dt>residuals</dt><dd data-field="residuals">${resL}° / ${resR}°</dd>
              <dt>PSIS distance</dt><dd data-field="psis">${r.psis_distance_sum.toFixed(2)} px</dd>
            </dl>
          </article>`;
      })
      .join("");
  }

  // -------------------------------------------------------------- banners

  private showBanner(message: string, retry: () => void): void {
    const banner = this.el<HTMLElement>("banner");
    banner.hidden = false;
    this.el<HTMLElement>("banner-text").textContent = message;
    const button = this.el<HTMLButtonElement>("banner-retry");
    button.onclick = () => {
      banner.hidden = true;
      retry();
    };
  }

  private clearBanner(): void {
    this.el<HTMLElement>("banner").hidden = true;
  }

  private el<T extends HTMLElement>(testId: string): T {
    const found = this.root.querySelector(`[data-testid="${testId}"]`);
    if (!found) throw new Error(`missing element ${testId}`);
    return found as T;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return err instanceof Error ? err.message : String(err);
}

export function mountViewer(root: HTMLElement, client: ApiClient, win: Window): ViewerApp {
  const app = new ViewerApp(root, client, win);
  void app.init();
  return app;
}

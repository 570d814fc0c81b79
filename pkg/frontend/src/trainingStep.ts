// Training step view: the model picker (one row per registry entry),
// the constrained-selection highlight, and the live loss chart with a
// convergence banner. Selection results come from the engine; the
// wizard highlights, it does not choose.

import type {
  EngineError,
  RegistryEntry,
  RunState,
  RunStatusDoc,
} from './types.js';
import { isEngineError } from './types.js';

export const POLL_INTERVAL_MS = 2000;

export interface PickerRow {
  name: string;
  inferenceMs: number;
  mapCoco: number;
  sizeMb: number;
  classCapacity: number | null;
  note: string | null;
  selected: boolean;
}

export interface TrainingStepView {
  pickerRows: PickerRow[];
  selectionError: { detail: string; bindingConstraints: string[] } | null;
  lossChart: Array<[number, number]>;
  runStatus: RunState | null;
  banner: string | null;
}

export function buildTrainingStepView(
  registry: RegistryEntry[],
  selection: RegistryEntry | EngineError | null,
  run: RunStatusDoc | null = null,
): TrainingStepView {
  const selectedName = selection && !isEngineError(selection) ? selection.name : null;
  const pickerRows = registry.map((entry) => ({
    name: entry.name,
    inferenceMs: entry.inference_ms,
    mapCoco: entry.map_coco,
    sizeMb: entry.size_mb,
    classCapacity: entry.class_capacity,
    note: entry.notes ?? null,
    selected: entry.name === selectedName,
  }));
  return {
    pickerRows,
    selectionError:
      selection && isEngineError(selection)
        ? {
            detail: selection.detail,
            bindingConstraints: parseBindingConstraints(selection.detail),
          }
        : null,
    lossChart: run?.loss_history ?? [],
    runStatus: run?.status ?? null,
    banner: bannerFor(run),
  };
}

/** The engine's infeasibility message names its binding constraints. */
export function parseBindingConstraints(detail: string): string[] {
  const match = detail.match(/binding: ([^)]*)/);
  if (!match) return [];
  return match[1].split(',').map((part) => part.trim().split('=')[0]);
}

function bannerFor(run: RunStatusDoc | null): string | null {
  if (!run) return null;
  if (run.status === 'converged') return `converged at step ${run.last_step}`;
  if (run.status === 'max_steps_reached') {
    return `stopped at the step budget (${run.last_step})`;
  }
  if (run.status === 'failed') return 'training failed';
  return null;
}

/**
 * Poll a run until it leaves `running`; returns a stop function.
 * The engine is the only source of status, so the wizard just asks again.
 */
export function watchRun(
  getStatus: () => Promise<RunStatusDoc>,
  onUpdate: (run: RunStatusDoc) => void,
  intervalMs: number = POLL_INTERVAL_MS,
): () => void {
  let stopped = false;
  const tick = async () => {
    if (stopped) return;
    const run = await getStatus();
    if (stopped) return;
    onUpdate(run);
    if (run.status === 'running' || run.status === 'pending') {
      setTimeout(tick, intervalMs);
    }
  };
  void tick();
  return () => {
    stopped = true;
  };
}

export function renderTrainingStepHtml(view: TrainingStepView): string {
  const lines: string[] = ['<section class="step step-training">'];
  lines.push('  <table class="model-picker">');
  lines.push(
    '    <tr><th>Model</th><th>ms/frame</th><th>mAP</th><th>MB</th><th>classes</th></tr>',
  );
  for (const row of view.pickerRows) {
    const classes = row.selected ? ' class="selected"' : '';
    const capacity = row.classCapacity === null ? 'no limit' : String(row.classCapacity);
    lines.push(
      `    <tr${classes} data-model="${row.name}"><td>${row.name}</td>` +
        `<td>${row.inferenceMs}</td><td>${row.mapCoco}</td>` +
        `<td>${row.sizeMb}</td><td>${capacity}</td></tr>`,
    );
  }
  lines.push('  </table>');
  if (view.selectionError) {
    lines.push(
      `  <p class="empty-state" data-binding="${view.selectionError.bindingConstraints.join(' ')}">` +
        `${view.selectionError.detail}</p>`,
    );
  }
  if (view.banner) {
    lines.push(`  <p class="banner banner-${view.runStatus}">${view.banner}</p>`);
  }
  if (view.lossChart.length > 0) {
    const points = view.lossChart.map(([step, loss]) => `${step},${loss}`).join(' ');
    lines.push(`  <svg class="loss-chart" data-points="${points}"></svg>`);
  }
  lines.push('</section>');
  return lines.join('\n');
}

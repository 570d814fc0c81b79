// Wizard state machine: dataset -> training -> app, strictly gated.
// Status transitions are monotone except through reset().

import type { RunState, StepStatus, WizardStep } from './types.js';

export const STEP_ORDER: readonly WizardStep[] = ['dataset', 'training', 'app'];

export interface WizardState {
  projectId: string;
  step: WizardStep;
  stepStatus: Record<WizardStep, StepStatus>;
  lastError: string | null;
}

export function newWizard(projectId: string): WizardState {
  return {
    projectId,
    step: 'dataset',
    stepStatus: { dataset: 'in_progress', training: 'incomplete', app: 'incomplete' },
    lastError: null,
  };
}

export interface GateContext {
  /** Latest known run state; the app step is locked while training runs. */
  runStatus?: RunState;
  /** The expert-only path skips training entirely. */
  expertOnly?: boolean;
}

export function canSelectStep(
  state: WizardState,
  step: WizardStep,
  context: GateContext = {},
): { ok: boolean; reason: string | null } {
  const index = STEP_ORDER.indexOf(step);
  for (const earlier of STEP_ORDER.slice(0, index)) {
    if (state.stepStatus[earlier] !== 'complete') {
      if (step === 'app' && earlier === 'training' && context.expertOnly) {
        continue; // expert-only bundles need no trained model
      }
      return { ok: false, reason: `${earlier} step is not complete` };
    }
  }
  if (step === 'app' && context.runStatus === 'running' && !context.expertOnly) {
    return { ok: false, reason: 'training is still running' };
  }
  return { ok: true, reason: null };
}

export function selectStep(
  state: WizardState,
  step: WizardStep,
  context: GateContext = {},
): WizardState {
  const gate = canSelectStep(state, step, context);
  if (!gate.ok) {
    throw new Error(`cannot open ${step} step: ${gate.reason}`);
  }
  const status = { ...state.stepStatus };
  if (status[step] === 'incomplete') {
    status[step] = 'in_progress';
  }
  return { ...state, step, stepStatus: status, lastError: null };
}

export function markStepComplete(state: WizardState, step: WizardStep): WizardState {
  return {
    ...state,
    stepStatus: { ...state.stepStatus, [step]: 'complete' },
    lastError: null,
  };
}

export function recordError(state: WizardState, message: string): WizardState {
  return { ...state, lastError: message };
}

/** Reopen a step; everything after it loses its progress too. */
export function resetFrom(state: WizardState, step: WizardStep): WizardState {
  const status = { ...state.stepStatus };
  const index = STEP_ORDER.indexOf(step);
  for (const later of STEP_ORDER.slice(index)) {
    status[later] = later === step ? 'in_progress' : 'incomplete';
  }
  return { ...state, step, stepStatus: status, lastError: null };
}

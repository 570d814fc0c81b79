import { describe, expect, it } from 'vitest';

import {
  canSelectStep,
  markStepComplete,
  newWizard,
  recordError,
  resetFrom,
  selectStep,
} from '../src/wizard.js';

describe('wizard gating', () => {
  it('starts on the dataset step', () => {
    const state = newWizard('p1');
    expect(state.step).toBe('dataset');
    expect(state.stepStatus).toEqual({
      dataset: 'in_progress',
      training: 'incomplete',
      app: 'incomplete',
    });
  });

  it('locks training until the dataset step completes', () => {
    const state = newWizard('p1');
    expect(canSelectStep(state, 'training').ok).toBe(false);
    expect(() => selectStep(state, 'training')).toThrow(/dataset step is not complete/);
    const ready = markStepComplete(state, 'dataset');
    expect(canSelectStep(ready, 'training').ok).toBe(true);
    expect(selectStep(ready, 'training').step).toBe('training');
  });

  it('locks the app step until training completes', () => {
    const state = markStepComplete(newWizard('p1'), 'dataset');
    expect(canSelectStep(state, 'app').ok).toBe(false);
    const trained = markStepComplete(state, 'training');
    expect(canSelectStep(trained, 'app').ok).toBe(true);
  });

  it('keeps the app step unreachable while training runs', () => {
    const trained = markStepComplete(
      markStepComplete(newWizard('p1'), 'dataset'),
      'training',
    );
    expect(canSelectStep(trained, 'app', { runStatus: 'running' }).ok).toBe(false);
    expect(canSelectStep(trained, 'app', { runStatus: 'converged' }).ok).toBe(true);
  });

  it('allows the expert-only path to skip training', () => {
    const state = markStepComplete(newWizard('p1'), 'dataset');
    expect(canSelectStep(state, 'app', { expertOnly: true }).ok).toBe(true);
    expect(
      canSelectStep(state, 'app', { expertOnly: true, runStatus: 'running' }).ok,
    ).toBe(true);
  });

  it('still requires the dataset step on the expert-only path', () => {
    const state = newWizard('p1');
    expect(canSelectStep(state, 'app', { expertOnly: true }).ok).toBe(false);
  });

  it('transitions are monotone except through reset', () => {
    let state = newWizard('p1');
    state = markStepComplete(state, 'dataset');
    state = selectStep(state, 'training');
    state = markStepComplete(state, 'training');
    expect(state.stepStatus.dataset).toBe('complete');
    state = resetFrom(state, 'dataset');
    expect(state.stepStatus).toEqual({
      dataset: 'in_progress',
      training: 'incomplete',
      app: 'incomplete',
    });
    expect(state.step).toBe('dataset');
  });

  it('records and clears inline errors', () => {
    let state = recordError(newWizard('p1'), 'import failed');
    expect(state.lastError).toBe('import failed');
    state = markStepComplete(state, 'dataset');
    expect(state.lastError).toBeNull();
  });
});

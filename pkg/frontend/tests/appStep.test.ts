import { describe, expect, it } from 'vitest';

import {
  buildAppStepView,
  emptyForm,
  renderAppStepHtml,
  validateForm,
} from '../src/appStep.js';
import type { DescriptorDoc } from '../src/types.js';
import { fixture } from './fixtures.js';

const descriptor = fixture<DescriptorDoc>('descriptor.json');
const manifest = fixture<Record<string, unknown>>('manifest.ios.json');
const lanes = fixture<Record<string, unknown>>('lanes.ios.beta.json');

function validForm() {
  return { ...emptyForm(), appName: 'RipWatch', guiColor: '#FF0000' };
}

describe('customization form validation', () => {
  it('accepts a well-formed customization', () => {
    expect(validateForm(validForm()).ok).toBe(true);
  });

  it('rejects a named color', () => {
    const result = validateForm({ ...validForm(), guiColor: 'green' });
    expect(result.ok).toBe(false);
    expect(result.fieldErrors.guiColor).toContain('#RRGGBB');
  });

  it('rejects a short hex color', () => {
    expect(validateForm({ ...validForm(), guiColor: '#12345' }).ok).toBe(false);
  });

  it('rejects an empty app name', () => {
    expect(validateForm({ ...validForm(), appName: '  ' }).ok).toBe(false);
  });

  it('rejects thresholds outside the open interval', () => {
    expect(validateForm({ ...validForm(), confidenceThreshold: 0 }).ok).toBe(false);
    expect(validateForm({ ...validForm(), confidenceThreshold: 1 }).ok).toBe(false);
    expect(validateForm({ ...validForm(), confidenceThreshold: 0.5 }).ok).toBe(true);
  });
});

describe('app step (contract against engine fixtures)', () => {
  it('previews the descriptor verbatim', () => {
    const view = buildAppStepView(validForm(), descriptor);
    expect(view.preview).not.toBeNull();
    expect(view.preview!.appName).toBe(descriptor.customization.app_name);
    expect(view.preview!.guiColor).toBe(descriptor.customization.gui_color);
    expect(view.preview!.classes).toEqual(descriptor.model!.label_map);
    expect(view.preview!.confidenceThreshold).toBe(
      descriptor.customization.confidence_threshold,
    );
    expect(view.preview!.platforms).toEqual(descriptor.target_platforms);
  });

  it('previews the expected two-class bundle', () => {
    const view = buildAppStepView(validForm(), descriptor);
    expect(view.preview!.appName).toBe('RipWatch');
    expect(view.preview!.guiColor).toBe('#FF0000');
    expect(view.preview!.classes).toEqual(['breaking_wave', 'rip_current']);
  });

  it('supports an expert-only descriptor with no model', () => {
    const expertDescriptor: DescriptorDoc = {
      ...descriptor,
      model: null,
      customization: { ...descriptor.customization, expert_mode_enabled: true },
    };
    const view = buildAppStepView(
      { ...validForm(), expertModeEnabled: true },
      expertDescriptor,
    );
    expect(view.preview!.classes).toEqual([]);
    expect(view.preview!.expertMode).toBe(true);
  });

  it('exposes downloads for the generated manifest and lanes', () => {
    const view = buildAppStepView(validForm(), descriptor, {
      manifest: { platform: 'ios', content: JSON.stringify(manifest) },
      lanes: { name: 'lanes.ios.beta', content: JSON.stringify(lanes) },
    });
    expect(view.downloads.map((d) => d.filename)).toEqual([
      'manifest.ios.json',
      'lanes.ios.beta.json',
    ]);
    const parsed = JSON.parse(view.downloads[0].content) as typeof manifest;
    expect(parsed).toEqual(manifest);
  });

  it('renders inline validation errors into the markup', () => {
    const html = renderAppStepHtml(
      buildAppStepView({ ...validForm(), guiColor: 'green' }, null),
    );
    expect(html).toContain('data-field="guiColor"');
    expect(html).toContain('#RRGGBB');
  });

  it('renders the preview with engine values', () => {
    const html = renderAppStepHtml(buildAppStepView(validForm(), descriptor));
    expect(html).toContain(`data-bundle="${descriptor.bundle_id}"`);
    expect(html).toContain('breaking_wave, rip_current');
  });
});

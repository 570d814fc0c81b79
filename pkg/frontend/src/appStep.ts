// App step view: the customization form (validated with the same rules
// the engine enforces), a live preview of the bundle descriptor, and
// download entries for the generated manifest and lane documents.

import type { DescriptorDoc } from './types.js';

const HEX_COLOR = /^#[0-9A-Fa-f]{6}$/;

export interface CustomizationForm {
  appName: string;
  guiColor: string;
  icon: string | null;
  logo: string | null;
  infoPanelText: string | null;
  expertModeEnabled: boolean;
  confidenceThreshold: number;
}

export function emptyForm(): CustomizationForm {
  return {
    appName: '',
    guiColor: '#2266AA',
    icon: null,
    logo: null,
    infoPanelText: null,
    expertModeEnabled: false,
    confidenceThreshold: 0.5,
  };
}

export interface FormValidation {
  ok: boolean;
  fieldErrors: Partial<Record<keyof CustomizationForm, string>>;
}

// Mirrors the engine's customization rules so users get inline errors
// before a request; the engine remains the authority on submit.
export function validateForm(form: CustomizationForm): FormValidation {
  const fieldErrors: FormValidation['fieldErrors'] = {};
  if (!form.appName.trim()) {
    fieldErrors.appName = 'app name must be non-empty';
  }
  if (!HEX_COLOR.test(form.guiColor)) {
    fieldErrors.guiColor = `expected #RRGGBB, got "${form.guiColor}"`;
  }
  if (!(form.confidenceThreshold > 0 && form.confidenceThreshold < 1)) {
    fieldErrors.confidenceThreshold = 'threshold must be inside (0, 1)';
  }
  return { ok: Object.keys(fieldErrors).length === 0, fieldErrors };
}

export interface DescriptorPreview {
  bundleId: string;
  templateId: string;
  appName: string;
  guiColor: string;
  classes: string[];
  expertMode: boolean;
  confidenceThreshold: number;
  platforms: string[];
  uploadEndpoint: string;
}

export interface DownloadEntry {
  label: string;
  filename: string;
  content: string;
}

export interface AppStepView {
  form: CustomizationForm;
  validation: FormValidation;
  preview: DescriptorPreview | null;
  downloads: DownloadEntry[];
  error: string | null;
}

export function buildAppStepView(
  form: CustomizationForm,
  descriptor: DescriptorDoc | null,
  documents: { manifest?: { platform: string; content: string }; lanes?: { name: string; content: string } } = {},
  apiError: string | null = null,
): AppStepView {
  const downloads: DownloadEntry[] = [];
  if (documents.manifest) {
    downloads.push({
      label: `build manifest (${documents.manifest.platform})`,
      filename: `manifest.${documents.manifest.platform}.json`,
      content: documents.manifest.content,
    });
  }
  if (documents.lanes) {
    downloads.push({
      label: 'deploy lanes',
      filename: `${documents.lanes.name}.json`,
      content: documents.lanes.content,
    });
  }
  return {
    form,
    validation: validateForm(form),
    preview: descriptor ? previewFrom(descriptor) : null,
    downloads,
    error: apiError,
  };
}

export function previewFrom(descriptor: DescriptorDoc): DescriptorPreview {
  return {
    bundleId: descriptor.bundle_id,
    templateId: descriptor.template_id,
    appName: descriptor.customization.app_name,
    guiColor: descriptor.customization.gui_color,
    classes: descriptor.model?.label_map ?? [],
    expertMode: descriptor.customization.expert_mode_enabled,
    confidenceThreshold: descriptor.customization.confidence_threshold,
    platforms: descriptor.target_platforms,
    uploadEndpoint: descriptor.upload_endpoint,
  };
}

export function renderAppStepHtml(view: AppStepView): string {
  const lines: string[] = ['<section class="step step-app">'];
  lines.push(`  <input name="app_name" value="${view.form.appName}">`);
  lines.push(`  <input name="gui_color" value="${view.form.guiColor}">`);
  for (const [field, message] of Object.entries(view.validation.fieldErrors)) {
    lines.push(`  <p class="field-error" data-field="${field}">${message}</p>`);
  }
  if (view.preview) {
    lines.push(
      `  <div class="preview" data-bundle="${view.preview.bundleId}">` +
        `${view.preview.appName} / ${view.preview.templateId} / ` +
        `${view.preview.classes.join(', ') || 'expert only'}</div>`,
    );
  }
  for (const download of view.downloads) {
    lines.push(
      `  <a class="download" download="${download.filename}">${download.label}</a>`,
    );
  }
  lines.push('</section>');
  return lines.join('\n');
}

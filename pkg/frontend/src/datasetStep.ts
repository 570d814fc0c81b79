// Dataset step view: import controls, validation outcome, statistics,
// and one sufficiency badge per class. Every number comes from engine
// documents; the wizard only arranges them.

import type { AdviceDoc, EngineError, StatsDoc, Tier } from './types.js';

export const BADGE_COLORS: Record<Tier, string> = {
  insufficient: 'red',
  marginal: 'amber',
  good: 'green',
  optimal: 'teal',
};

export const IMPORT_FORMATS = ['voc', 'coco', 'yolo', 'mturk', 'folders'] as const;

export const DEFAULT_SPLIT_RATIO = '6:2:2';

export interface TierBadge {
  className: string;
  tier: Tier;
  images: number;
  color: string;
}

export interface DatasetStepView {
  importFormats: readonly string[];
  stats: { totalImages: number; unlabeledImages: number } | null;
  badges: TierBadge[];
  notes: string[];
  splitControls: { ratio: string; seed: number | null };
  complete: boolean;
  error: { code: string; detail: string; retry: boolean } | null;
}

export function buildDatasetStepView(
  stats: StatsDoc | null,
  advice: AdviceDoc | null,
  options: { seed?: number; apiError?: EngineError | null } = {},
): DatasetStepView {
  const apiError = options.apiError ?? null;
  const badges: TierBadge[] = [];
  if (stats && advice) {
    for (const className of Object.keys(advice.tiers).sort()) {
      const tier = advice.tiers[className];
      badges.push({
        className,
        tier,
        images: stats.per_class[className]?.images ?? 0,
        color: BADGE_COLORS[tier],
      });
    }
  }
  const imported = stats !== null && stats.total_images > 0;
  return {
    importFormats: IMPORT_FORMATS,
    stats: stats
      ? { totalImages: stats.total_images, unlabeledImages: stats.unlabeled_images }
      : null,
    badges,
    notes: advice?.notes ?? [],
    splitControls: { ratio: DEFAULT_SPLIT_RATIO, seed: options.seed ?? null },
    complete: imported && apiError === null,
    error: apiError
      ? { code: apiError.error, detail: apiError.detail, retry: true }
      : null,
  };
}

export function renderDatasetStepHtml(view: DatasetStepView): string {
  const lines: string[] = ['<section class="step step-dataset">'];
  if (view.error) {
    lines.push(
      `  <p class="error" data-code="${view.error.code}">${view.error.detail}` +
        ' <button class="retry">Retry</button></p>',
    );
  }
  if (view.stats) {
    lines.push(
      `  <p class="stats">${view.stats.totalImages} images` +
        ` (${view.stats.unlabeledImages} unlabeled)</p>`,
    );
  }
  for (const badge of view.badges) {
    lines.push(
      `  <span class="badge badge-${badge.color}" data-class="${badge.className}">` +
        `${badge.className}: ${badge.tier} (${badge.images} images)</span>`,
    );
  }
  lines.push(
    `  <label>split ratio <input name="ratio" value="${view.splitControls.ratio}"></label>`,
  );
  lines.push('</section>');
  return lines.join('\n');
}

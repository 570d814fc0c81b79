// Shapes shared with the engine: the service HTTP+JSON API and the CLI's
// --json documents. The wizard never computes these values itself.

export type Tier = 'insufficient' | 'marginal' | 'good' | 'optimal';

export interface RegistryEntry {
  name: string;
  inference_ms: number;
  map_coco: number;
  size_mb: number;
  task: string;
  class_capacity: number | null;
  notes?: string;
}

export interface EngineError {
  error: string;
  detail: string;
}

export function isEngineError(value: unknown): value is EngineError {
  return (
    typeof value === 'object' &&
    value !== null &&
    'error' in value &&
    'detail' in value
  );
}

export interface StatsDoc {
  total_images: number;
  unlabeled_images: number;
  per_class: Record<string, { images: number; boxes: number }>;
}

export interface AdviceDoc {
  tiers: Record<string, Tier>;
  notes: string[];
}

export interface SplitDoc {
  sizes: { train: number; test: number; eval: number };
  seed: number;
  ratio: string;
  files: string[];
}

export type RunState =
  | 'pending'
  | 'running'
  | 'converged'
  | 'max_steps_reached'
  | 'failed';

export interface RunStatusDoc {
  run_id: string;
  status: RunState;
  last_step: number | null;
  last_loss: number | null;
  loss_history: Array<[number, number]>;
}

export interface DescriptorDoc {
  bundle_id: string;
  template_id: string;
  customization: {
    app_name: string;
    gui_color: string;
    icon: string | null;
    logo: string | null;
    info_panel_text: string | null;
    expert_mode_enabled: boolean;
    confidence_threshold: number;
  };
  model: {
    label_map: string[];
    checksum: string;
    runtime_format_tag: string;
    input_size: [number, number];
  } | null;
  target_platforms: string[];
  upload_endpoint: string;
  created_at: string;
}

export interface Project {
  project_id: string;
  owner: string;
  name: string;
  label_map: string[];
  created_at: string;
}

export interface UploadReceipt {
  observation_id: string;
  stored_checksum: string;
}

export interface CurationRecord {
  observation_id: string;
  curator: string;
  verdict: 'accepted' | 'rejected' | 'corrected';
  corrected_boxes: unknown[] | null;
  feedback_text: string | null;
  decided_at: string;
}

export interface FeedbackDoc {
  observation_id: string;
  status: 'pending' | 'decided';
  verdict?: string;
  feedback_text?: string | null;
  decided_at?: string;
}

export type WizardStep = 'dataset' | 'training' | 'app';
export type StepStatus = 'incomplete' | 'in_progress' | 'complete';

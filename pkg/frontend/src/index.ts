export * from './types.js';
export * from './wizard.js';
export * from './datasetStep.js';
export * from './trainingStep.js';
export * from './appStep.js';
export * from './api.js';

/** Shared types for the blind note-review interface. */

export const CRITERIA = ['age', 'gender', 'body_part', 'coherence'] as const;

export type CriterionKey = (typeof CRITERIA)[number];

export type Verdict = 'TRUE' | 'FALSE';

export const CRITERION_LABELS: Record<CriterionKey, string> = {
  age: 'Age',
  gender: 'Gender',
  body_part: 'Body part',
  coherence: 'Coherence',
};

/**
 * Rubric shown to reviewers as expandable help, so every rater applies the
 * same reading of each criterion.
 */
export const CRITERION_HELP: Record<CriterionKey, string> = {
  age:
    'Check every statement of the patient’s age. If the note states an age ' +
    'more than once, all mentions must match; an age stated only once counts as ' +
    'consistent. Dates (of procedures, visits, injuries) are not ages.',
  gender:
    'Check the stated gender and the pronouns used for the patient. Every ' +
    'section must refer to the patient the same way; a switch such as ' +
    '“she” in the history but “he” in the plan is inconsistent.',
  body_part:
    'If the visit concerns an injury to a specific body part or side, every ' +
    'section must name the same part and side. A note with no injury body part ' +
    'at all counts as consistent (not applicable).',
  coherence:
    'The assessment and plan must make sense given the complaint and history: ' +
    'conditions raised earlier should be addressed, and nothing in the plan may ' +
    'contradict the history. Extra reasonable content in the plan is fine.',
};

export interface SessionInfo {
  session_id: string;
  reviewer_id: string;
  position: number;
  total: number;
  completed: boolean;
}

export interface NotePayload {
  session_id: string;
  note_id: string;
  text: string;
  position: number;
  total: number;
}

export interface SubmitAck {
  accepted: boolean;
  position: number;
  total: number;
  completed: boolean;
}

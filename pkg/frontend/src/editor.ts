/**
 * Constraint-editor helpers: canned rule snippets ("quick actions") and the
 * merge logic that appends them to the session's program text.
 */

export type QuickAction = 'immutable' | 'monotone-up' | 'monotone-down';

export function ruleFor(action: QuickAction, feature: string): string {
  switch (action) {
    case 'immutable':
      return `PLAF x_cf.${feature} = x.${feature}`;
    case 'monotone-up':
      return `PLAF x_cf.${feature} >= x.${feature}`;
    case 'monotone-down':
      return `PLAF x_cf.${feature} <= x.${feature}`;
  }
}

/**
 * Append a rule to a program, skipping exact duplicates and keeping the text
 * newline-terminated so further appends stay line-structured.
 */
export function appendRule(text: string, rule: string): string {
  const lines = text.split('\n').map((l) => l.trim());
  if (lines.includes(rule.trim())) return text;
  const base = text.trimEnd();
  return base.length ? `${base}\n${rule}\n` : `${rule}\n`;
}

export function applyQuickAction(
  text: string,
  action: QuickAction,
  feature: string,
): string {
  return appendRule(text, ruleFor(action, feature));
}

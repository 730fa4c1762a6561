// Pure HTML string renderers; every number shown comes verbatim from an
// /ask or /stats response field.

import { DocumentRow, StatsResponse } from './api.js';
import { AnswerEntry, UiSession } from './state.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

const SQL_KEYWORDS =
  /\b(SELECT|FROM|WHERE|GROUP|ORDER|BY|JOIN|INNER|LEFT|RIGHT|ON|AND|OR|NOT|IN|AS|HAVING|LIMIT|DISTINCT|UNION|WITH|BETWEEN|LIKE|IS|NULL)\b/gi;

export function highlightSql(sql: string): string {
  // Split literals out first so keywords inside them are left untouched.
  const parts = sql.split(/('(?:[^']|'')*')/);
  return parts
    .map((part, i) => {
      if (i % 2 === 1) return `<span class="lit">${escapeHtml(part)}</span>`;
      let html = escapeHtml(part);
      html = html.replace(SQL_KEYWORDS, (m) => `<span class="kw">${m.toUpperCase()}</span>`);
      html = html.replace(/\b\d+(?:\.\d+)?\b/g, (m) => `<span class="num">${m}</span>`);
      return html;
    })
    .join('');
}

export function renderDocumentsTable(documents: DocumentRow[]): string {
  if (documents.length === 0) {
    return '<p class="muted">No documents were retrieved.</p>';
  }
  const rows = documents
    .map(
      (d) =>
        `<tr><td>${escapeHtml(d.id)}</td><td>${escapeHtml(d.class)}</td>` +
        `<td class="num-cell">${d.score.toFixed(4)}</td><td class="num-cell">${d.tokens}</td></tr>`,
    )
    .join('');
  return (
    '<table class="docs"><thead><tr>' +
    '<th>document</th><th>class</th><th>score</th><th>tokens</th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderAnswerCard(entry: AnswerEntry): string {
  const { answer } = entry;
  const qid = escapeHtml(answer.question_id);
  const locked = entry.feedback !== 'none';
  const sqlBlock = answer.sql_found
    ? `<pre class="sql">${highlightSql(answer.sql)}</pre>`
    : `<p class="no-sql">No SQL found in the response:</p><pre class="sql">${escapeHtml(answer.sql)}</pre>`;
  return `
<article class="card answer" data-qid="${qid}">
  <header>
    <span class="badge ${answer.pipeline_used}">${answer.pipeline_used}</span>
    <span class="muted">${answer.prompt_tokens} prompt tokens</span>
  </header>
  <p class="question">${escapeHtml(entry.question)}</p>
  ${sqlBlock}
  <div class="feedback">
    <button data-action="up" data-qid="${qid}" ${locked ? 'disabled' : ''}>&#128077;${entry.feedback === 'up' ? ' recorded' : ''}</button>
    <button data-action="down" data-qid="${qid}" ${locked ? 'disabled' : ''}>&#128078;${entry.feedback === 'down' ? ' recorded' : ''}</button>
    <button data-action="toggle-docs" data-qid="${qid}">${entry.expanded ? 'Hide' : 'Show'} ${answer.documents.length} documents</button>
  </div>
  ${entry.expanded ? renderDocumentsTable(answer.documents) : ''}
</article>`;
}

export function renderStatsPanel(stats: StatsResponse | null): string {
  if (!stats) {
    return '<div class="card stats"><p class="muted">Waiting for /stats&hellip;</p></div>';
  }
  const armRows = Object.entries(stats.arms)
    .map(
      ([arm, s]) =>
        `<tr><td>${escapeHtml(arm)}</td><td class="num-cell">${s.count}</td>` +
        `<td class="num-cell">${s.avg.toFixed(3)}</td></tr>`,
    )
    .join('');
  const weights = Object.entries(stats.weights)
    .filter(([k]) => /^w\d$/.test(k))
    .map(([k, v]) => `${k}=${(v as number).toFixed(3)}`)
    .join(' ');
  const alloc = stats.allocation
    ? `t_tbl=${stats.allocation['t_tbl']} t_col=${stats.allocation['t_col']} t_hint=${stats.allocation['t_hint']} (T=${stats.allocation['T']})`
    : 'n/a';
  return `
<div class="card stats">
  <h2>Routing bandit</h2>
  <p class="muted">&epsilon;=${stats.epsilon} window=${stats.window}</p>
  <table class="docs"><thead><tr><th>pipeline</th><th>feedback</th><th>avg reward</th></tr></thead>
  <tbody>${armRows}</tbody></table>
  <p class="muted">allocation: ${escapeHtml(alloc)}</p>
  <p class="muted">weights: ${escapeHtml(weights)}</p>
</div>`;
}

export function renderSession(session: UiSession): string {
  const parts: string[] = [];
  if (session.toast) {
    parts.push(`<div class="toast" data-action="dismiss-toast">${escapeHtml(session.toast)}</div>`);
  }
  if (session.banner) {
    parts.push(`<div class="banner">${escapeHtml(session.banner)} <button data-action="retry">Retry</button></div>`);
  }
  if (session.validation) {
    parts.push(`<div class="validation">${escapeHtml(session.validation)}</div>`);
  }
  parts.push(renderStatsPanel(session.stats));
  for (const entry of session.entries) {
    parts.push(renderAnswerCard(entry));
  }
  return parts.join('\n');
}

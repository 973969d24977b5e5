/** State to HTML. Pure string rendering: no reads from the DOM, so the
 * same state always produces the same markup. */

import {
  ConsoleState,
  DrilldownView,
  EventTableRow,
  ICON_STYLES,
  TopologyView,
} from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(state: ConsoleState): string {
  if (!state.staleData) {
    return "";
  }
  const detail = state.lastError ? escapeHtml(state.lastError) : "node unreachable";
  return `<div class="banner banner-stale" role="alert">showing last known data; ${detail}</div>`;
}

export function renderTopology(view: TopologyView | null): string {
  if (view === null) {
    return `<p class="empty">no data yet</p>`;
  }
  const nodes = view.nodes
    .map((node) => {
      const quarantine = node.quarantined ? `<span class="tag-quarantined">quarantined</span>` : "";
      return (
        `<div class="device ${node.icon.className}" data-device="${escapeHtml(node.deviceId)}" ` +
        `data-status="${node.status}">` +
        `<span class="device-icon" style="background:${node.icon.color}"></span>` +
        `<span class="device-name">${escapeHtml(node.displayName)}</span>` +
        `<span class="device-state">${node.icon.label}</span>${quarantine}` +
        `<button class="drill" data-device="${escapeHtml(node.deviceId)}">details</button>` +
        `<button class="quarantine" data-device="${escapeHtml(node.deviceId)}">quarantine</button>` +
        `</div>`
      );
    })
    .join("");
  const links = view.links
    .map(([a, b]) => `<li>${escapeHtml(a)} &harr; ${escapeHtml(b)}</li>`)
    .join("");
  return (
    `<div class="topology" data-head="${view.headHeight}">${nodes}</div>` +
    `<ul class="links">${links}</ul>` +
    `<p class="refresh">height ${view.headHeight}, refreshed ${view.lastRefresh}</p>`
  );
}

export function renderEventTable(rows: EventTableRow[]): string {
  const body = rows
    .map((row) => {
      const details = row.verdictDetails.length
        ? `<ul class="verdicts">${row.verdictDetails
            .map((d) => `<li>${escapeHtml(d)}</li>`)
            .join("")}</ul>`
        : "";
      return (
        `<tr data-event="${row.eventId}" class="kind-${row.kind}">` +
        `<td>${row.height}.${row.index}</td>` +
        `<td>${escapeHtml(row.kindLabel)}</td>` +
        `<td>${escapeHtml(row.subject)}</td>` +
        `<td>${row.time}</td>` +
        `<td>${escapeHtml(row.summary)}${details}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="events"><thead><tr>` +
    `<th>block</th><th>kind</th><th>subject</th><th>time</th><th>summary</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

export function renderDrilldown(view: DrilldownView): string {
  if (!view.found) {
    return `<div class="drilldown not-found">device ${escapeHtml(view.deviceId)} not found</div>`;
  }
  const style = ICON_STYLES[view.status];
  const verdicts = view.verdicts
    .map(
      (v) =>
        `<li class="${v.offending ? "offending" : "clean"}">` +
        `${escapeHtml(v.path)}: ${escapeHtml(v.verdict)}</li>`,
    )
    .join("");
  const components = view.components
    .map(
      (c) =>
        `<li>${escapeHtml(c.name)} ${escapeHtml(c.version)} (${escapeHtml(c.supplier)}) ` +
        `<span class="badge badge-${escapeHtml(c.finding)}">${escapeHtml(c.finding)}</span></li>`,
    )
    .join("");
  const maintenance = view.maintenance
    .map((m) => `<li>${escapeHtml(m.action)} ${escapeHtml(m.from)} &rarr; ${escapeHtml(m.to)} @ ${m.time}</li>`)
    .join("");
  return (
    `<div class="drilldown ${style.className}">` +
    `<h3>${escapeHtml(view.deviceId)} &mdash; ${style.label}</h3>` +
    `<h4>artifacts</h4><ul class="artifact-verdicts">${verdicts || "<li>no report yet</li>"}</ul>` +
    `<h4>components</h4><ul class="components">${components || "<li>none registered</li>"}</ul>` +
    `<h4>maintenance</h4><ul class="maintenance">${maintenance || "<li>none recorded</li>"}</ul>` +
    `</div>`
  );
}

export function renderToast(state: ConsoleState): string {
  if (!state.toast) {
    return "";
  }
  return `<div class="toast">${escapeHtml(state.toast)}</div>`;
}

export function renderConsole(state: ConsoleState): string {
  return (
    renderBanner(state) +
    `<section id="topology">${renderTopology(state.topology)}</section>` +
    `<section id="events">${renderEventTable(state.events)}</section>` +
    renderToast(state)
  );
}

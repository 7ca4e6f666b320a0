// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripts injected into the page through Runtime.evaluate. Overlay nodes carry
// data-webpilot-overlay and hang off the document element so they never shift
// sibling positions inside <body>.

namespace webpilot::browser::scripts {

inline constexpr const char* sibling_index_fn = R"JS(
function (n) {
  let idx = 1;
  for (let s = n.previousElementSibling; s; s = s.previousElementSibling)
    if (s.tagName === n.tagName) idx++;
  return idx;
})JS";

inline constexpr const char* discover_elements = R"JS(
(function () {
  const siblingIndex = %SIBLING%;
  const query = 'a, button, input, select, textarea, [role], [onclick], [contenteditable]';
  const marks = [null];
  const out = [];
  for (const el of document.querySelectorAll(query)) {
    if (el.closest('[data-webpilot-overlay]')) continue;
    const r = el.getBoundingClientRect();
    const cs = getComputedStyle(el);
    if (r.width <= 0 || r.height <= 0 || cs.display === 'none' || cs.visibility === 'hidden') continue;
    const raw = el.innerText || (el.tagName === 'INPUT' && el.type === 'password' ? '' : el.value) ||
      el.getAttribute('placeholder') || el.getAttribute('aria-label') || el.getAttribute('title') || '';
    const text = String(raw).replace(/\s+/g, ' ').trim();
    marks.push(el);
    out.push({
      tag: el.tagName.toLowerCase(),
      id: el.getAttribute('id'),
      name: el.getAttribute('name'),
      role: el.getAttribute('role'),
      aria_label: el.getAttribute('aria-label'),
      type: el.getAttribute('type'),
      classes: Array.from(el.classList),
      sibling_index: siblingIndex(el),
      text: Array.from(text).slice(0, 80).join(''),
      mark_id: marks.length - 1,
      box: {x: r.left + window.scrollX, y: r.top + window.scrollY, width: r.width, height: r.height},
    });
  }
  window.__webpilotMarks = marks;
  return out;
})())JS";

inline constexpr const char* inject_som = R"JS(
(function (boxes) {
  document.querySelectorAll('[data-webpilot-overlay="som"]').forEach(n => n.remove());
  const root = document.createElement('div');
  root.setAttribute('data-webpilot-overlay', 'som');
  root.setAttribute('aria-hidden', 'true');
  root.style.cssText = 'position:absolute;left:0;top:0;width:0;height:0;pointer-events:none;z-index:2147483646;';
  for (const b of boxes) {
    const box = document.createElement('div');
    box.style.cssText = `position:absolute;left:${b.x}px;top:${b.y}px;width:${b.width}px;height:${b.height}px;` +
      'border:2px solid #e6194b;box-sizing:border-box;';
    const label = document.createElement('span');
    label.textContent = String(b.mark_id);
    label.style.cssText = 'position:absolute;left:0;top:-15px;background:#e6194b;color:#fff;' +
      'font:bold 11px sans-serif;line-height:15px;padding:0 3px;';
    box.appendChild(label);
    root.appendChild(box);
  }
  document.documentElement.appendChild(root);
  return boxes.length;
}))JS";

inline constexpr const char* remove_overlay = R"JS(
(function (kind) {
  const nodes = document.querySelectorAll('[data-webpilot-overlay="' + kind + '"]');
  nodes.forEach(n => n.remove());
  return nodes.length;
}))JS";

inline constexpr const char* dom_snapshot = R"JS(
(function () {
  const root = document.documentElement.cloneNode(true);
  root.querySelectorAll('[data-webpilot-overlay], script, style, noscript, template, link, meta').forEach(n => n.remove());
  const walker = document.createTreeWalker(root, NodeFilter.SHOW_COMMENT);
  const comments = [];
  while (walker.nextNode()) comments.push(walker.currentNode);
  comments.forEach(c => c.remove());
  return root.outerHTML;
})())JS";

inline constexpr const char* page_summary = R"JS(
(function () {
  const text = document.body ? document.body.innerText : '';
  return {title: document.title, url: location.href, text: text.replace(/\s+/g, ' ').trim().slice(0, 400)};
})())JS";

inline constexpr const char* element_action = R"JS(
(function (a) {
  let nodes;
  try { nodes = document.querySelectorAll(a.selector); } catch (e) { return {ok: false, error: 'invalid selector: ' + a.selector}; }
  if (nodes.length !== 1) return {ok: false, error: 'unresolved target: selector matched ' + nodes.length + ' elements'};
  const el = nodes[0];
  if (el.scrollIntoView) el.scrollIntoView({block: 'center', inline: 'center'});
  const r = el.getBoundingClientRect();
  const cs = getComputedStyle(el);
  const interactive = a.kind !== 'scrape' && a.kind !== 'scroll';
  if (interactive && (r.width <= 0 || r.height <= 0 || cs.display === 'none' || cs.visibility === 'hidden'))
    return {ok: false, error: 'element not visible'};
  if (interactive && el.disabled) return {ok: false, error: 'element is disabled'};
  const fire = type => el.dispatchEvent(new Event(type, {bubbles: true}));
  switch (a.kind) {
  case 'click':
    if (el instanceof HTMLElement) {
      if (el.focus) el.focus();
      el.click();
      return {ok: true, message: 'clicked ' + a.selector};
    }
    return {ok: true, mouse: true, x: r.left + r.width / 2, y: r.top + r.height / 2, message: 'clicked ' + a.selector};
  case 'fill': {
    if (el.isContentEditable) {
      el.focus();
      el.textContent = a.value;
      fire('input');
      return {ok: true, message: 'filled ' + a.selector};
    }
    if (el.tagName !== 'INPUT' && el.tagName !== 'TEXTAREA') return {ok: false, error: 'element is not fillable'};
    const type = (el.getAttribute('type') || 'text').toLowerCase();
    if (['checkbox', 'radio', 'submit', 'button', 'file', 'image', 'reset', 'hidden'].includes(type))
      return {ok: false, error: 'input of type ' + type + ' is not fillable'};
    if (el.readOnly) return {ok: false, error: 'element is read-only'};
    el.focus();
    const proto = el.tagName === 'INPUT' ? HTMLInputElement.prototype : HTMLTextAreaElement.prototype;
    Object.getOwnPropertyDescriptor(proto, 'value').set.call(el, a.value);
    fire('input');
    fire('change');
    return {ok: true, message: 'filled ' + a.selector};
  }
  case 'select_option': {
    if (el.tagName !== 'SELECT') return {ok: false, error: 'element is not a select'};
    const options = Array.from(el.options);
    const opt = options.find(o => o.value === a.value) || options.find(o => o.text.trim() === a.value);
    if (!opt) return {ok: false, error: 'no option matching "' + a.value + '"'};
    el.value = opt.value;
    opt.selected = true;
    fire('input');
    fire('change');
    return {ok: true, message: 'selected "' + opt.value + '" in ' + a.selector};
  }
  case 'scroll': {
    const d = a.direction || 'down';
    const dy = d === 'up' ? -0.8 * el.clientHeight : d === 'down' ? 0.8 * el.clientHeight : 0;
    const dx = d === 'left' ? -0.8 * el.clientWidth : d === 'right' ? 0.8 * el.clientWidth : 0;
    el.scrollBy(dx, dy);
    return {ok: true, message: 'scrolled ' + a.selector + ' ' + d};
  }
  case 'scrape':
    return {ok: true, message: 'scraped: ' + String(el.innerText || el.value || '').slice(0, 4000)};
  case 'upload_file':
    if (el.tagName !== 'INPUT' || (el.getAttribute('type') || '').toLowerCase() !== 'file')
      return {ok: false, error: 'element is not a file input'};
    return {ok: true, upload: true};
  }
  return {ok: false, error: 'unsupported action ' + a.kind};
}))JS";

inline constexpr const char* page_scroll = R"JS(
(function (d) {
  const dy = d === 'up' ? -0.8 * innerHeight : d === 'down' ? 0.8 * innerHeight : 0;
  const dx = d === 'left' ? -0.8 * innerWidth : d === 'right' ? 0.8 * innerWidth : 0;
  window.scrollBy(dx, dy);
  return {x: scrollX, y: scrollY};
}))JS";

inline constexpr const char* page_text = R"JS(
(function () { return document.body ? document.body.innerText.slice(0, 4000) : ''; })())JS";

inline constexpr const char* highlight = R"JS(
(function (a) {
  let nodes;
  try { nodes = document.querySelectorAll(a.selector); } catch (e) { return false; }
  if (nodes.length !== 1) return false;
  document.querySelectorAll('[data-webpilot-overlay="highlight"]').forEach(n => n.remove());
  const r = nodes[0].getBoundingClientRect();
  const x = r.left + window.scrollX, y = r.top + window.scrollY;
  const root = document.createElement('div');
  root.setAttribute('data-webpilot-overlay', 'highlight');
  root.style.cssText = 'position:absolute;left:0;top:0;width:0;height:0;pointer-events:none;z-index:2147483647;';
  const outline = document.createElement('div');
  outline.style.cssText = `position:absolute;left:${x - 3}px;top:${y - 3}px;width:${r.width + 6}px;height:${r.height + 6}px;` +
    'border:3px solid #ff4f00;border-radius:4px;box-sizing:border-box;';
  const note = document.createElement('div');
  note.className = 'webpilot-note';
  note.textContent = a.note;
  note.style.cssText = `position:absolute;left:${x}px;top:${y + r.height + 8}px;max-width:320px;background:#fff8e6;` +
    'color:#222;border:1px solid #ff4f00;border-radius:4px;padding:4px 8px;font:13px sans-serif;' +
    'box-shadow:0 2px 6px rgba(0,0,0,.25);';
  root.appendChild(outline);
  root.appendChild(note);
  document.documentElement.appendChild(root);
  return true;
}))JS";

inline constexpr const char* element_chain = R"JS(
(function (el) {
  const siblingIndex = %SIBLING%;
  if (!el || !el.isConnected) return null;
  const chain = [];
  for (let n = el; n && n.nodeType === 1; n = n.parentElement) {
    chain.push({
      tag: n.tagName.toLowerCase(),
      id: n.getAttribute('id'),
      name: n.getAttribute('name'),
      role: n.getAttribute('role'),
      aria_label: n.getAttribute('aria-label'),
      type: n.getAttribute('type'),
      classes: Array.from(n.classList),
      sibling_index: siblingIndex(n),
      text: '',
      testid: n.getAttribute('data-testid'),
    });
  }
  return chain;
}))JS";

inline constexpr const char* probe_selector = R"JS(
(function (sel, target) {
  let m;
  try { m = document.querySelectorAll(sel); } catch (e) { return {count: -1, first: false}; }
  return {count: m.length, first: m.length > 0 && m[0] === target};
}))JS";

} // namespace webpilot::browser::scripts

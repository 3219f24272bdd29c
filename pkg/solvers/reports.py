"""
Report writers: human tables, flat key = value machine reports, CSV traces.
"""
import csv


def machine_number(value):
    return format(float(value), '.17g')


def human_number(value):
    return f'{float(value):.6f}'


class Report:
    """Ordered key/value pairs with dot-namespaced keys."""

    def __init__(self, namespace):
        self.namespace = namespace
        self.entries = []

    def add(self, key, value):
        if hasattr(value, 'item'):
            value = value.item()
        self.entries.append((f'{self.namespace}.{key}', value))
        return self

    def add_table(self, key, table):
        for state, value in zip(table.states, table.values):
            self.add(f'{key}.{state}', float(value))
        return self

    def render(self):
        lines = []
        for key, value in self.entries:
            if isinstance(value, bool):
                text = 'true' if value else 'false'
            elif isinstance(value, float):
                text = machine_number(value)
            else:
                text = str(value)
            lines.append(f'{key} = {text}')
        return '\n'.join(lines) + '\n'

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(self.render())


def format_table(table, title=None):
    rows = [title] if title else []
    width = max(len(s) for s in table.states)
    for state, value in zip(table.states, table.values):
        rows.append(f'  {state:<{width}}  {human_number(value):>14}')
    return '\n'.join(rows)


def write_trace(path, report):
    """CSV with columns iter,objective,residual; iteration 0 has no residual."""
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(['iter', 'objective', 'residual'])
        for k, value in enumerate(report.objective_trace):
            residual = report.residuals[k - 1] if 0 < k <= len(report.residuals) else ''
            writer.writerow([k, machine_number(value), machine_number(residual) if residual != '' else ''])

import csv
import io
import json
import math
import os
from datetime import datetime

import numpy as np
import scipy.sparse as sp
from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
from reportlab.lib.units import inch
from reportlab.platypus import SimpleDocTemplate, Table, TableStyle, Paragraph, Spacer

from platelab.config import Config
from platelab.exceptions import ConfigError, SchemaError
from platelab.models import TIMESERIES_COLUMNS, TimeSeries

HEADER_STYLE = [
    ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#3b82f6')),
    ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
    ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
    ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
    ('FONTSIZE', (0, 0), (-1, 0), 10),
    ('BOTTOMPADDING', (0, 0), (-1, 0), 12),
    ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
    ('GRID', (0, 0), (-1, -1), 1, colors.black),
]


def format_float(x):
    """17 significant digits, enough to round-trip any double"""
    return format(float(x), Config.FLOAT_FORMAT)


class ExportService:
    """Service for exporting results to various formats"""

    # CSV

    @staticmethod
    def timeseries_to_csv(series):
        """Time series in the fixed column order"""
        output = io.StringIO()
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(TIMESERIES_COLUMNS)
        for row in series.rows:
            writer.writerow([format_float(row[name]) for name in TIMESERIES_COLUMNS])
        return output.getvalue()

    @staticmethod
    def write_timeseries_csv(series, path):
        with open(path, 'w', newline='', encoding='utf-8') as f:
            f.write(ExportService.timeseries_to_csv(series))

    @staticmethod
    def read_timeseries_csv(path):
        """Parse a diagnostics CSV back into a TimeSeries, checking the header"""
        try:
            with open(path, newline='', encoding='utf-8') as f:
                lines = list(csv.reader(f))
        except OSError as e:
            raise ConfigError('csv', f"cannot read {path}: {e.strerror}")
        if not lines:
            raise SchemaError("empty file")
        if tuple(lines[0]) != TIMESERIES_COLUMNS:
            raise SchemaError(f"header does not match the diagnostics columns: {lines[0][:3]}...")

        series = TimeSeries()
        for number, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            if len(line) != len(TIMESERIES_COLUMNS):
                raise SchemaError(f"line {number} has {len(line)} fields")
            try:
                series.rows.append({name: float(value) for name, value in zip(TIMESERIES_COLUMNS, line)})
            except ValueError:
                raise SchemaError(f"line {number} is not numeric")
        t = series.column('t')
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise SchemaError("t is not strictly increasing")
        return series

    # JSON

    @staticmethod
    def to_json(data, indent=2):
        """Deterministic JSON: sorted keys, floats with 17 digits, NaN/inf as null"""
        def encode(value, level):
            pad = ' ' * (indent * (level + 1))
            end = ' ' * (indent * level)
            if isinstance(value, dict):
                if not value:
                    return '{}'
                items = [f'{pad}{json.dumps(str(k))}: {encode(value[k], level + 1)}'
                         for k in sorted(value, key=str)]
                return '{\n' + ',\n'.join(items) + '\n' + end + '}'
            if isinstance(value, (list, tuple, np.ndarray)):
                if len(value) == 0:
                    return '[]'
                items = [f'{pad}{encode(v, level + 1)}' for v in value]
                return '[\n' + ',\n'.join(items) + '\n' + end + ']'
            if isinstance(value, (bool, np.bool_)):
                return 'true' if value else 'false'
            if value is None:
                return 'null'
            if isinstance(value, (int, np.integer)):
                return str(int(value))
            if isinstance(value, (float, np.floating)):
                return format_float(value) if math.isfinite(value) else 'null'
            return json.dumps(str(value))

        return encode(data, 0) + '\n'

    @staticmethod
    def write_json(data, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(ExportService.to_json(data))

    @staticmethod
    def read_json(path):
        try:
            with open(path, encoding='utf-8') as f:
                return json.load(f)
        except OSError as e:
            raise ConfigError('config', f"cannot read {path}: {e.strerror}")
        except json.JSONDecodeError as e:
            raise ConfigError('config', f"malformed JSON at line {e.lineno}: {e.msg}")

    # Mesh and nodal fields

    @staticmethod
    def mesh_to_text(mesh):
        """Section headers with counts, then 'index x y' and 'index a b c' lines"""
        lines = [f'vertices {mesh.n_vertices}']
        lines += [f'{i} {format_float(x)} {format_float(y)}' for i, (x, y) in enumerate(mesh.vertices)]
        lines.append(f'triangles {mesh.n_triangles}')
        lines += [f'{k} {a} {b} {c}' for k, (a, b, c) in enumerate(mesh.triangles)]
        lines.append(f'boundary {mesh.boundary_vertices.size}')
        lines += [str(int(i)) for i in mesh.boundary_vertices]
        return '\n'.join(lines) + '\n'

    @staticmethod
    def write_mesh(mesh, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(ExportService.mesh_to_text(mesh))

    @staticmethod
    def state_fields(state):
        """Named nodal columns of a State, as read back by the custom preset"""
        return {
            'w': state.w, 'v_x': state.v[:, 0], 'v_y': state.v[:, 1],
            'wt': state.wt, 'vt_x': state.vt[:, 0], 'vt_y': state.vt[:, 1],
            'theta': state.theta, 'q_x': state.q[:, 0], 'q_y': state.q[:, 1],
        }

    @staticmethod
    def write_nodal_fields(fields, path):
        """One 'field <name>' line followed by one value per vertex"""
        with open(path, 'w', encoding='utf-8') as f:
            for name, values in fields.items():
                f.write(f'field {name}\n')
                f.writelines(f'{format_float(x)}\n' for x in np.asarray(values, dtype=float))

    @staticmethod
    def read_nodal_fields(path):
        try:
            with open(path, encoding='utf-8') as f:
                lines = [line.strip() for line in f if line.strip()]
        except OSError as e:
            raise ConfigError('ic.path', f"cannot read {path}: {e.strerror}")

        fields, current = {}, None
        for number, line in enumerate(lines, start=1):
            if line.startswith('field'):
                parts = line.split()
                if len(parts) != 2:
                    raise ConfigError('ic.path', f"line {number}: expected 'field <name>'")
                current = parts[1]
                fields[current] = []
            elif current is None:
                raise ConfigError('ic.path', f"line {number}: value before any field header")
            else:
                try:
                    fields[current].append(float(line))
                except ValueError:
                    raise ConfigError('ic.path', f"line {number}: not a number")
        return {name: np.array(values) for name, values in fields.items()}

    @staticmethod
    def write_coo(matrix, path):
        """'i j value' per stored entry, no header"""
        coo = sp.coo_matrix(matrix)
        with open(path, 'w', encoding='utf-8') as f:
            f.writelines(f'{i} {j} {format_float(v)}\n' for i, j, v in zip(coo.row, coo.col, coo.data))

    @staticmethod
    def write_matrices(matrices, directory):
        """One <name>.coo file per named matrix"""
        ExportService.ensure_output_dir(directory)
        paths = []
        for name, matrix in matrices.items():
            path = os.path.join(directory, f'{name}.coo')
            ExportService.write_coo(matrix, path)
            paths.append(path)
        return paths

    # PDF

    @staticmethod
    def export_run_report_to_pdf(summary, series, run_config=None):
        """Run report: metadata, summary table, decay fit and the last rows"""
        buffer = io.BytesIO()
        doc = SimpleDocTemplate(buffer, pagesize=letter)
        elements = []
        styles = getSampleStyleSheet()

        title_style = ParagraphStyle(
            'CustomTitle',
            parent=styles['Heading1'],
            fontSize=24,
            textColor=colors.HexColor('#1e293b'),
            spaceAfter=30,
            alignment=1
        )
        elements.append(Paragraph("Plate Simulation Report", title_style))
        elements.append(Paragraph(f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
                                  styles['Normal']))
        if run_config is not None:
            geometry = ', '.join(f'{k}={v}' for k, v in run_config.geometry.items())
            elements.append(Paragraph(f"Geometry: {geometry}; thermal BC: {run_config.thermal_bc}; "
                                      f"initial data: {run_config.ic.kind}", styles['Normal']))
        elements.append(Spacer(1, 20))

        summary_data = [['Metric', 'Value']]
        for key in sorted(summary):
            value = summary[key]
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                summary_data.append([key, f"{value:.6g}"])
        summary_table = Table(summary_data, colWidths=[3 * inch, 2 * inch])
        summary_table.setStyle(TableStyle(HEADER_STYLE))
        elements.append(summary_table)
        elements.append(Spacer(1, 30))

        fit = summary.get('decay_fit')
        if isinstance(fit, dict):
            elements.append(Paragraph("Decay Fit", styles['Heading2']))
            elements.append(Spacer(1, 12))
            fit_data = [['alpha', 'C', 'r2', 'window']]
            fit_data.append([f"{fit['alpha']:.6g}", f"{fit['C']:.6g}", f"{fit['r2']:.6f}",
                             f"[{fit['t_start']:.4g}, {fit['t_end']:.4g}]"])
            fit_table = Table(fit_data, colWidths=[1.2 * inch, 1.2 * inch, 1.2 * inch, 2 * inch])
            fit_table.setStyle(TableStyle(HEADER_STYLE))
            elements.append(fit_table)
            elements.append(Spacer(1, 30))

        if series.rows:
            elements.append(Paragraph("Last Time Steps", styles['Heading2']))
            elements.append(Spacer(1, 12))
            columns = ('t', 'E_total', 'F_total', 'mean_theta', 'rot_v', 'div_v')
            rows = [list(columns)]
            for row in series.rows[-Config.PDF_TAIL_ROWS:]:
                rows.append([f"{row[name]:.5g}" for name in columns])
            tail_table = Table(rows, colWidths=[1 * inch] * len(columns))
            tail_table.setStyle(TableStyle(HEADER_STYLE + [('FONTSIZE', (0, 1), (-1, -1), 8)]))
            elements.append(tail_table)

        doc.build(elements)
        buffer.seek(0)
        return buffer.getvalue()

    @staticmethod
    def write_pdf(data, path):
        with open(path, 'wb') as f:
            f.write(data)

    @staticmethod
    def ensure_output_dir(path):
        """Create the directory if needed and check that it is writable"""
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            raise ConfigError('output_dir', f"cannot create {path}: {e.strerror}")
        if not os.access(path, os.W_OK):
            raise ConfigError('output_dir', f"{path} is not writable")
        return path

import plotly.graph_objects as go

DEFAULT_COLORS = {
    'proposed': '#4CAF50',
    'naive': '#FF9800',
    'text': '#2c3e50',
    'subtext': '#7f8c8d',
    'card': '#ffffff',
    'background': '#ecf0f1',
    'span': 'rgba(52, 152, 219, 0.12)',
    'ideal': '#95a5a6',
}


class DashboardComponents:
    def __init__(self, colors=None):
        self.colors = {**DEFAULT_COLORS, **(colors or {})}

    def _layout(self, fig, title, height=420):
        fig.update_layout(title=title, paper_bgcolor=self.colors['card'], plot_bgcolor=self.colors['card'], font={'color': self.colors['text']}, height=height, margin=dict(l=40, r=20, t=60, b=40), legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1))
        fig.update_xaxes(showgrid=True, gridcolor=self.colors['background'])
        fig.update_yaxes(showgrid=True, gridcolor=self.colors['background'])
        return fig

    def create_tracking_scatter(self, scatters, span, kind):
        """Measured value against the commanded label, one trace per mode, successful trials only."""
        fig = go.Figure()
        for mode, frame in scatters.items():
            fig.add_trace(go.Scatter(x=frame['label'].tolist(), y=frame['measurement'].tolist(), mode='markers', name=mode, marker=dict(size=8, color=self.colors.get(mode, self.colors['text']), opacity=0.8)))
        labels = sorted({float(label) for frame in scatters.values() for label in frame['label']})
        if labels:
            fig.add_trace(go.Scatter(x=labels, y=labels, mode='lines', name='label = measured', line=dict(color=self.colors['ideal'], dash='dash')))
        fig.add_vrect(x0=span[0], x1=span[1], fillcolor=self.colors['span'], line_width=0)
        axis = 'completion time (s)' if kind == 'duration' else 'wiping frequency (Hz)'
        fig.update_xaxes(title_text=f"label: {axis}", color=self.colors['text'])
        fig.update_yaxes(title_text=f"measured {axis}", color=self.colors['text'])
        return self._layout(fig, "Label tracking")

    def create_success_bars(self, summaries):
        """Grouped success-rate bars per label, one group per mode."""
        fig = go.Figure()
        for mode, frame in summaries.items():
            by_label = frame.groupby('label', sort=True)[['successes', 'trials']].sum()
            rates = (100.0 * by_label['successes'] / by_label['trials']).round(1)
            fig.add_trace(go.Bar(x=[f"{label:g}" for label in by_label.index], y=rates.tolist(), name=mode, marker_color=self.colors.get(mode, self.colors['text']), text=rates.tolist(), textposition='auto'))
        fig.update_layout(barmode='group')
        fig.update_xaxes(title_text="label", color=self.colors['text'])
        fig.update_yaxes(title_text="success rate (%)", range=[0, 100], color=self.colors['text'])
        return self._layout(fig, "Success rate per label")

    def create_failure_chart(self, failures):
        """Stacked failure-reason counts per mode."""
        fig = go.Figure()
        for reason in sorted(failures['reason'].unique()):
            rows = failures[failures['reason'] == reason]
            fig.add_trace(go.Bar(x=rows['mode'].tolist(), y=rows['count'].tolist(), name=reason))
        fig.update_layout(barmode='stack')
        fig.update_yaxes(title_text="failed trials", color=self.colors['text'])
        return self._layout(fig, "Failure reasons", height=360)

    def write_html(self, figures, path, div_prefix='workbench'):
        """One standalone page; fixed div ids and a CDN plotly.js keep the file identical across reruns."""
        parts = [fig.to_html(full_html=False, include_plotlyjs='cdn' if i == 0 else False, div_id=f"{div_prefix}-{i}") for i, fig in enumerate(figures)]
        page = "<html><head><meta charset=\"utf-8\"></head><body>\n" + "\n".join(parts) + "\n</body></html>\n"
        path.write_text(page, encoding='utf-8')
        return path

# UI Components
